"""Forgetting simulation on pseudo-future tasks."""

import copy
import logging
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from memory import MemoryBuffer, RandomSelectionPolicy, rebuild_for_new_task, slot_budgets
from nn_core import ModelParams, TrainConfig
from replay_trainer import BaseLocalUpdate, LocalUpdateSpec, TrainingRngs, evaluate_task
from task_streams import Task
from utils.errors import ContractViolation
from .plan import SimConfig

logger = logging.getLogger(__name__)


def staged_budget(buffer: MemoryBuffer) -> int:
    """Slot budget the staged task gets once it is committed."""
    if buffer.staging is None:
        raise ContractViolation("no staged task: the switching point is searched right after training a task")
    task_ids = sorted(buffer.slots) + [buffer.staging.task_id]
    return slot_budgets(buffer.capacity, task_ids)[buffer.staging.task_id]


class GlobalSimulator:
    """Scores candidate ring sizes of the staged task against simulated forgetting.

    The parameters and buffer are snapshotted on construction and never
    modified; every call works on fresh copies and the same simulation
    seed, so candidates differ only in their ring size.

    Args:
        task: Task just trained, whose ring size is being searched
        pseudo_tasks: Pseudo-future tasks, trained in order
        learner: Local updating method
        params: Parameters after training ``task``
        buffer: Memory with ``task`` staged
        plan_points: Ring sizes of the earlier tasks
        sim_config: Simulation settings
        train_config: Optimisation settings shared with real tasks
        seed: Simulation seed
        class_table: Admissible classes per real task id, None with a shared head
    """

    def __init__(
        self,
        task: Task,
        pseudo_tasks: Sequence[Task],
        learner: BaseLocalUpdate,
        params: ModelParams,
        buffer: MemoryBuffer,
        plan_points: Mapping[int, int],
        sim_config: SimConfig,
        train_config: TrainConfig,
        seed: int,
        class_table: Optional[Dict[int, Tuple[int, ...]]] = None,
    ):
        self.task = task
        self.pseudo_tasks = list(pseudo_tasks)
        self.learner = learner
        self.params = params.snapshot()
        self.buffer = buffer.snapshot()
        self.plan_points = dict(plan_points)
        self.sim_config = sim_config
        self.train_config = train_config
        self.seed = int(seed)
        self.budget = staged_budget(self.buffer)
        taken = set(self.buffer.slots) | {self.buffer.staging.task_id} | set(class_table or {})
        clashes = sorted(p.task_id for p in self.pseudo_tasks if p.task_id in taken)
        if clashes:
            raise ContractViolation(f"pseudo-task ids {clashes} collide with real task ids")
        self.class_table = None
        if class_table is not None:
            self.class_table = dict(class_table)
            for pseudo in self.pseudo_tasks:
                self.class_table[pseudo.task_id] = pseudo.class_ids

    def __call__(self, candidate: int) -> Tuple[float, float]:
        """Simulate with ring size ``candidate`` for the staged task.

        Returns:
            Tuple of (test loss, test accuracy) of the task under the simulated parameters

        Raises:
            ContractViolation: ``candidate`` outside [0, slot budget]
        """
        if not 0 <= candidate <= self.budget:
            raise ContractViolation(f"candidate ring size {candidate} outside [0, {self.budget}]")
        if not self.pseudo_tasks:
            accuracy, loss = evaluate_task(self.params, self.task, self.class_table)
            return loss, accuracy
        shuffle_seq, memory_seq, policy_seq = np.random.SeedSequence(self.seed).spawn(3)
        params = self.params.snapshot()
        buffer = self.buffer.snapshot(rng=np.random.default_rng(policy_seq))
        rngs = TrainingRngs(np.random.default_rng(shuffle_seq), np.random.default_rng(memory_seq))
        learner = copy.copy(self.learner)
        points = dict(self.plan_points)
        points[self.task.task_id] = int(candidate)
        rebuild_for_new_task(buffer, buffer.task_count, points)
        spec = LocalUpdateSpec(
            lam=self.train_config.lam,
            epochs=self.sim_config.pseudo_epochs,
            batch_size=self.train_config.batch_size,
            learning_rate=self.train_config.learning_rate,
            policy=RandomSelectionPolicy(),
        )
        for position, pseudo in enumerate(self.pseudo_tasks):
            learner.local_update(params, pseudo, buffer, spec, rngs, self.class_table)
            if position < len(self.pseudo_tasks) - 1:
                points[pseudo.task_id] = 0
                rebuild_for_new_task(buffer, buffer.task_count, points)
        accuracy, loss = evaluate_task(params, self.task, self.class_table)
        return loss, accuracy


def global_sim(
    candidate: int,
    task: Task,
    pseudo_tasks: Sequence[Task],
    learner: BaseLocalUpdate,
    params: ModelParams,
    buffer: MemoryBuffer,
    plan_points: Mapping[int, int],
    sim_config: SimConfig,
    train_config: TrainConfig,
    seed: int,
    class_table: Optional[Dict[int, Tuple[int, ...]]] = None,
) -> Tuple[float, float]:
    """(loss, accuracy) of ``task`` after simulating the pseudo-tasks with ring size ``candidate``."""
    simulator = GlobalSimulator(
        task, pseudo_tasks, learner, params, buffer, plan_points, sim_config, train_config, seed, class_table
    )
    return simulator(candidate)
