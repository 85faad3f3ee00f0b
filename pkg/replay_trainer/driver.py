"""Sequential training over a task stream with a memory boundary after every task."""

import copy
import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from memory import BaseMemoryPolicy, MemoryBuffer, rebuild_for_new_task
from nn_core import ModelParams, TrainConfig, evaluate, init_params
from task_streams import Task, TaskStream, build_logit_mask
from utils.seeding import SeedBundle
from .base_update import BaseLocalUpdate, LocalUpdateSpec, TrainingRngs
from .er_update import ExperienceReplay

logger = logging.getLogger(__name__)


@dataclass
class StreamState:
    """Everything that evolves while a stream is trained."""

    params: ModelParams
    buffer: MemoryBuffer
    rngs: TrainingRngs
    plan_points: Dict[int, int] = field(default_factory=dict)
    trained: int = 0

    def copy(self) -> "StreamState":
        return StreamState(
            self.params.snapshot(), self.buffer.snapshot(), self.rngs.copy(), dict(self.plan_points), self.trained
        )


@dataclass
class StreamRun:
    """Outcome of one pass over a stream.

    ``accuracy_matrix[i - 1][j - 1]`` is the test accuracy of task j after
    training task i (rows grow by one entry per task).
    """

    params: ModelParams
    buffer: MemoryBuffer
    plan_points: Dict[int, int]
    accuracy_matrix: List[List[float]]
    loss_matrix: List[List[float]]
    traces: Dict[int, Any] = field(default_factory=dict)
    train_seconds: float = 0.0
    search_seconds: float = 0.0

    @property
    def final_accuracies(self) -> List[float]:
        return self.accuracy_matrix[-1]

    @property
    def average_accuracy(self) -> float:
        return float(np.mean(self.accuracy_matrix[-1]))


ChoosePoint = Callable[["StreamRunner", StreamState, Task], Tuple[int, Any]]
OnBoundary = Callable[[StreamState], None]


def evaluate_task(
    params: ModelParams, task: Task, class_table: Optional[Dict[int, Tuple[int, ...]]] = None
) -> Tuple[float, float]:
    """Test accuracy and loss of ``task``, restricted to its classes when a class table is given."""
    mask = build_logit_mask(np.full(len(task.test), task.task_id), class_table, params.num_outputs)
    return evaluate(params, task.test, mask)


class StreamRunner:
    """Trains a network over a task stream with one memory policy.

    Args:
        stream: Tasks to learn in order
        capacity: Memory size |M|
        policy: Memory policy used for every real task
        train_config: Optimisation settings
        seeds: Named seeds of this repeat
        learner: Local updating method (experience replay by default)
    """

    def __init__(
        self,
        stream: TaskStream,
        capacity: int,
        policy: BaseMemoryPolicy,
        train_config: TrainConfig,
        seeds: SeedBundle,
        learner: Optional[BaseLocalUpdate] = None,
    ):
        self.stream = stream
        self.capacity = capacity
        self.policy = policy
        self.train_config = train_config
        self.seeds = seeds
        self.learner = learner or ExperienceReplay()
        self.class_table = stream.class_table()
        self.spec = LocalUpdateSpec(
            lam=train_config.lam,
            epochs=train_config.epochs,
            batch_size=train_config.batch_size,
            learning_rate=train_config.learning_rate,
            policy=policy,
        )

    def fork(self) -> "StreamRunner":
        """Runner on the same stream and settings with its own learner and policy objects."""
        trial = copy.copy(self)
        trial.learner = copy.copy(self.learner)
        trial.policy = copy.copy(self.policy)
        trial.spec = dataclasses.replace(self.spec, policy=trial.policy)
        return trial

    def start(self) -> StreamState:
        layer_sizes = self.train_config.layer_sizes(self.stream.input_dim, self.stream.num_outputs)
        return StreamState(
            params=init_params(layer_sizes, self.seeds.seed("init")),
            buffer=MemoryBuffer(self.capacity, rng=self.seeds.rng("policy")),
            rngs=TrainingRngs(self.seeds.rng("shuffle"), self.seeds.rng("memory")),
        )

    def train_task(self, state: StreamState, task: Task) -> StreamState:
        self.learner.local_update(state.params, task, state.buffer, self.spec, state.rngs, self.class_table)
        state.trained = task.task_id
        return state

    def close_task(self, state: StreamState, ring_size: int) -> StreamState:
        """Record a_i for the task just trained and rebuild the memory."""
        state.plan_points[state.trained] = int(ring_size)
        rebuild_for_new_task(state.buffer, state.trained, state.plan_points)
        return state

    def default_ring_size(self, state: StreamState) -> int:
        return self.policy.ring_size(state.buffer)

    def evaluate_row(self, state: StreamState) -> Tuple[List[float], List[float]]:
        accuracies, losses = [], []
        for task in self.stream.tasks[:state.trained]:
            accuracy, loss = evaluate_task(state.params, task, self.class_table)
            accuracies.append(accuracy)
            losses.append(loss)
        return accuracies, losses

    def replay_remaining(self, state: StreamState) -> StreamState:
        """Train the rest of the stream, using plan entries where present and the policy default otherwise."""
        for task in self.stream.tasks[state.trained:]:
            self.train_task(state, task)
            self.close_task(state, state.plan_points.get(task.task_id, self.default_ring_size(state)))
        return state

    def run(self, choose_point: Optional[ChoosePoint] = None, on_boundary: Optional[OnBoundary] = None) -> StreamRun:
        """Train every task, fix its ring size and rebuild the memory.

        Args:
            choose_point: Returns (a_i, trace) for the task just trained; the policy default when None
            on_boundary: Called with the state after every rebuild
        """
        state = self.start()
        accuracy_matrix, loss_matrix = [], []
        traces: Dict[int, Any] = {}
        train_seconds = search_seconds = 0.0
        for task in self.stream.tasks:
            started = time.perf_counter()
            self.train_task(state, task)
            train_seconds += time.perf_counter() - started
            accuracies, losses = self.evaluate_row(state)
            accuracy_matrix.append(accuracies)
            loss_matrix.append(losses)
            started = time.perf_counter()
            if choose_point is None:
                ring_size, trace = self.default_ring_size(state), None
            else:
                ring_size, trace = choose_point(self, state, task)
            search_seconds += time.perf_counter() - started
            if trace is not None:
                traces[task.task_id] = trace
            self.close_task(state, ring_size)
            if on_boundary is not None:
                on_boundary(state)
            logger.info(
                f"Task {task.task_id}/{self.stream.T}: mean accuracy {np.mean(accuracies):.4f}, ring size {ring_size}"
            )
        return StreamRun(
            params=state.params,
            buffer=state.buffer,
            plan_points=dict(state.plan_points),
            accuracy_matrix=accuracy_matrix,
            loss_matrix=loss_matrix,
            traces=traces,
            train_seconds=train_seconds,
            search_seconds=search_seconds,
        )


def run_stream(
    stream: TaskStream,
    capacity: int,
    policy: BaseMemoryPolicy,
    train_config: TrainConfig,
    seeds: SeedBundle,
    choose_point: Optional[ChoosePoint] = None,
    learner: Optional[BaseLocalUpdate] = None,
) -> StreamRun:
    """Train ``stream`` once with ``policy``; see ``StreamRunner.run``."""
    return StreamRunner(stream, capacity, policy, train_config, seeds, learner).run(choose_point)
