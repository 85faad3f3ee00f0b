import logging
from typing import Dict, Optional

import numpy as np

from nn_core import Batch
from task_streams import Task
from utils.errors import ConfigurationError
from .base_policy import BaseMemoryPolicy
from .buffer import MemoryBuffer
from .updates import (
    cur_res_update,
    cur_ring_full_update,
    finalize_curriculum_reservoir,
    finalize_curriculum_ring,
    hybrid_update,
    random_selection_fill,
    refresh_easy_pool,
    reservoir_update,
    ring_full_update,
    start_curriculum,
)

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = 0.2
DEFAULT_RING_GAMMA = 0.1


class ReservoirPolicy(BaseMemoryPolicy):
    """ER-Res: reservoir sampling, no ring part."""

    name = "er-res"

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        reservoir_update(buffer, batch, buffer.staging.task_id)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return 0


class RingFullPolicy(BaseMemoryPolicy):
    """ER-Ring-Full: class-balanced FIFOs fill the whole slot."""

    name = "er-ring-full"

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        ring_full_update(buffer, batch, buffer.staging.task_id)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return buffer.staging.budget


class HybridPolicy(BaseMemoryPolicy):
    """ER-Hybrid: reservoir until a stored class is down to one example, then ring-full for good."""

    name = "er-hybrid"

    def begin_task(self, buffer: MemoryBuffer, task: Task, epochs: int) -> None:
        buffer.watch_singletons = True
        super().begin_task(buffer, task, epochs)

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        hybrid_update(buffer, batch, buffer.staging.task_id)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return buffer.staging.budget if buffer.hybrid_switched else 0


class MixedPolicy(BaseMemoryPolicy):
    """Collects both parts so any ring size can be committed later.

    With ``curriculum`` the reservoir part follows ER-CurRes and the ring
    part follows ER-CurRing-Full. The ring size normally comes from a
    switching plan; ``default_ring_size`` is used otherwise.
    """

    name = "mixed"

    def __init__(self, curriculum: bool = False, gamma: float = DEFAULT_GAMMA, default_ring_size: int = 0):
        self.curriculum = curriculum
        self.gamma = gamma
        self.default_ring_size = default_ring_size
        self.needs_epoch_stats = curriculum
        self._epochs = 1

    def begin_task(self, buffer: MemoryBuffer, task: Task, epochs: int) -> None:
        super().begin_task(buffer, task, epochs)
        self._epochs = epochs
        if self.curriculum:
            start_curriculum(buffer, self.gamma, epochs)

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        staging = buffer.staging
        if self.curriculum:
            state = staging.curriculum
            cur_res_update(buffer, epoch, self._epochs, state.easy_pool, batch, self.gamma)
            cur_ring_full_update(buffer, epoch, self._epochs, state.easy_by_class, batch)
        else:
            reservoir_update(buffer, batch, staging.task_id)
            ring_full_update(buffer, batch, staging.task_id)

    def end_epoch(self, buffer: MemoryBuffer, epoch: int, correct: np.ndarray, losses: np.ndarray) -> None:
        if self.curriculum:
            refresh_easy_pool(buffer, epoch, correct, losses)

    def finish_task(self, buffer: MemoryBuffer) -> None:
        if self.curriculum:
            finalize_curriculum_reservoir(buffer)
            finalize_curriculum_ring(buffer)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return min(self.default_ring_size, buffer.staging.budget)


class CurResPolicy(BaseMemoryPolicy):
    """ER-CurRes: reservoir sampling restricted to easy examples in the later epochs."""

    name = "er-cur-res"
    needs_epoch_stats = True

    def __init__(self, gamma: float = DEFAULT_GAMMA):
        self.gamma = gamma
        self._epochs = 1

    def begin_task(self, buffer: MemoryBuffer, task: Task, epochs: int) -> None:
        super().begin_task(buffer, task, epochs)
        self._epochs = epochs
        start_curriculum(buffer, self.gamma, epochs)

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        cur_res_update(buffer, epoch, self._epochs, buffer.staging.curriculum.easy_pool, batch, self.gamma)

    def end_epoch(self, buffer: MemoryBuffer, epoch: int, correct: np.ndarray, losses: np.ndarray) -> None:
        refresh_easy_pool(buffer, epoch, correct, losses)

    def finish_task(self, buffer: MemoryBuffer) -> None:
        finalize_curriculum_reservoir(buffer)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return 0


class CurRingFullPolicy(BaseMemoryPolicy):
    """ER-CurRing-Full: class FIFOs fed only with easy examples in the later epochs."""

    name = "er-cur-ring-full"
    needs_epoch_stats = True

    def __init__(self, gamma: float = DEFAULT_RING_GAMMA):
        self.gamma = gamma
        self._epochs = 1

    def begin_task(self, buffer: MemoryBuffer, task: Task, epochs: int) -> None:
        super().begin_task(buffer, task, epochs)
        self._epochs = epochs
        start_curriculum(buffer, self.gamma, epochs)

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        cur_ring_full_update(buffer, epoch, self._epochs, buffer.staging.curriculum.easy_by_class, batch)

    def end_epoch(self, buffer: MemoryBuffer, epoch: int, correct: np.ndarray, losses: np.ndarray) -> None:
        refresh_easy_pool(buffer, epoch, correct, losses)

    def finish_task(self, buffer: MemoryBuffer) -> None:
        finalize_curriculum_ring(buffer)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return buffer.staging.budget


class RandomSelectionPolicy(BaseMemoryPolicy):
    """Pseudo-task memory: a uniform random selection taken once the task ends."""

    name = "random-selection"

    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        pass

    def finish_task(self, buffer: MemoryBuffer) -> None:
        random_selection_fill(buffer)

    def ring_size(self, buffer: MemoryBuffer) -> int:
        return 0


POLICIES: Dict[str, type] = {
    ReservoirPolicy.name: ReservoirPolicy,
    RingFullPolicy.name: RingFullPolicy,
    HybridPolicy.name: HybridPolicy,
    CurResPolicy.name: CurResPolicy,
    CurRingFullPolicy.name: CurRingFullPolicy,
    MixedPolicy.name: MixedPolicy,
    RandomSelectionPolicy.name: RandomSelectionPolicy,
}


def create_policy(name: str, gamma: Optional[float] = None) -> BaseMemoryPolicy:
    """Instantiate a policy by name.

    Raises:
        ConfigurationError: Unknown policy name
    """
    if name not in POLICIES:
        raise ConfigurationError(f"unknown memory policy '{name}'", ["method"])
    cls = POLICIES[name]
    if cls in (CurResPolicy, CurRingFullPolicy, MixedPolicy) and gamma is not None:
        return cls(gamma=gamma)
    return cls()
