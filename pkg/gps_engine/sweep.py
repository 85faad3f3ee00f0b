"""Grid sweeps of a task's global loss over its ring size."""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from memory import MixedPolicy
from nn_core import TrainConfig
from replay_trainer import StreamRunner
from task_streams import TaskStream
from utils.errors import ContractViolation
from utils.seeding import SeedBundle
from .binary_search import candidate_grid, search_stride
from .oracle import replay_score
from .plan import SimConfig
from .simulation import staged_budget

logger = logging.getLogger(__name__)


def sweep_switching_profile(
    stream: TaskStream,
    capacity: int,
    train_config: TrainConfig,
    sim_config: SimConfig,
    seeds: SeedBundle,
    task_id: int,
    stride: Optional[int] = None,
) -> List[Dict[str, float]]:
    """Score every grid ring size of ``task_id`` by replaying the rest of the stream.

    Earlier tasks are closed with ring size 0. The grid is the search grid
    of ``sim_config`` unless ``stride`` is given.

    Returns:
        Rows ``{"a_j", "loss", "accuracy"}`` in increasing a_j
    """
    if not 1 <= task_id <= stream.T:
        raise ContractViolation(f"task {task_id} is not in a stream of {stream.T} tasks")
    runner = StreamRunner(stream, capacity, MixedPolicy(), train_config, seeds)
    state = runner.start()
    for task in stream.tasks[:task_id]:
        runner.train_task(state, task)
        if task.task_id < task_id:
            runner.close_task(state, 0)
    budget = staged_budget(state.buffer)
    if stride is None:
        stride = search_stride(budget, sim_config.min_stride, sim_config.max_stride)
    target = stream.task(task_id)
    rows = []
    for a in candidate_grid(budget, stride):
        loss, accuracy = replay_score(runner, state, target, a)
        rows.append({"a_j": a, "loss": loss, "accuracy": accuracy})
        logger.debug(f"Sweep task {task_id}: a={a} loss {loss:.4f} accuracy {accuracy:.4f}")
    return rows


def is_unimodal(values: Sequence[float], tolerance: float = 0.0, shape: str = "valley") -> bool:
    """Whether ``values`` fall then rise (``valley``) or rise then fall (``peak``).

    Steps no larger than ``tolerance`` count as flat.
    """
    diffs = np.diff(np.asarray(values, dtype=np.float64))
    if shape == "peak":
        diffs = -diffs
    signs = [int(np.sign(d)) for d in diffs if abs(d) > tolerance]
    rising = False
    for s in signs:
        if s > 0:
            rising = True
        elif rising:
            return False
    return True


def unimodal_fraction(profiles: Sequence[Sequence[float]], tolerance: float = 0.0) -> float:
    if not profiles:
        return 0.0
    return sum(is_unimodal(p, tolerance) for p in profiles) / len(profiles)
