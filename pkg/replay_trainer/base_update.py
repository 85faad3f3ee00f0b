import copy
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from memory import BaseMemoryPolicy, MemoryBuffer
from nn_core import ModelParams
from task_streams import Task
from utils.errors import ConfigurationError


@dataclass
class LocalUpdateSpec:
    """Settings of one call of the local updating method.

    Attributes:
        lam: Weight of the memory loss
        epochs: Passes over the task (k)
        batch_size: Rows per task batch and per memory batch
        learning_rate: SGD step size
        policy: Memory policy fed with every task batch
    """

    lam: float
    epochs: int
    batch_size: int
    learning_rate: float
    policy: BaseMemoryPolicy

    def __post_init__(self):
        bad = []
        if self.epochs < 1:
            bad.append("epochs")
        if self.batch_size < 1:
            bad.append("batch_size")
        if self.lam < 0:
            bad.append("lambda")
        if not self.learning_rate > 0:
            bad.append("learning_rate")
        if bad:
            raise ConfigurationError("invalid local update settings", bad)


class TrainingRngs:
    """Independent generators for task shuffling and memory sampling."""

    def __init__(self, shuffle: np.random.Generator, memory: np.random.Generator):
        self.shuffle = shuffle
        self.memory = memory

    @classmethod
    def from_seeds(cls, shuffle_seed: int, memory_seed: int) -> "TrainingRngs":
        return cls(np.random.default_rng(shuffle_seed), np.random.default_rng(memory_seed))

    def copy(self) -> "TrainingRngs":
        return TrainingRngs(copy.deepcopy(self.shuffle), copy.deepcopy(self.memory))


class BaseLocalUpdate(ABC):
    """Base class for local updating methods g(theta, task, memory)."""

    @abstractmethod
    def local_update(
        self,
        params: ModelParams,
        task: Task,
        buffer: MemoryBuffer,
        spec: LocalUpdateSpec,
        rngs: TrainingRngs,
        class_table: Optional[Dict[int, Tuple[int, ...]]] = None,
    ) -> Tuple[ModelParams, MemoryBuffer]:
        """Train on ``task`` while replaying ``buffer``.

        Args:
            params: Network, updated in place
            task: Task to learn
            buffer: Memory of earlier tasks; the policy stages this task into it
            spec: Optimisation and policy settings
            rngs: Shuffle and memory-sampling generators
            class_table: Admissible classes per task id, None with a shared head

        Returns:
            Tuple of (params, buffer)
        """
        pass
