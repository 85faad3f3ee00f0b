import logging
from typing import Optional, Tuple

from memory import DEFAULT_GAMMA, MixedPolicy
from nn_core import TrainConfig
from replay_trainer import BaseLocalUpdate, StreamRun, StreamRunner, StreamState, evaluate_task
from task_streams import Task, TaskStream
from utils.seeding import SeedBundle
from .binary_search import global_bs
from .plan import SearchTrace, SimConfig, SwitchingPlan
from .simulation import staged_budget

logger = logging.getLogger(__name__)


def replay_score(runner: StreamRunner, state: StreamState, task: Task, candidate: int) -> Tuple[float, float]:
    """(loss, accuracy) of ``task`` after closing it with ``candidate`` and replaying the real remaining tasks.

    Works on a copy of ``state`` and a forked runner, so candidates can be
    scored on several threads. Later tasks without a solved point use the
    policy default.
    """
    trial = state.copy()
    trial_runner = runner.fork()
    trial_runner.close_task(trial, candidate)
    trial_runner.replay_remaining(trial)
    accuracy, loss = evaluate_task(trial.params, task, runner.class_table)
    return loss, accuracy


class OracleChooser:
    """Solves each switching point by replaying the true future from a snapshot."""

    def __init__(self, sim_config: SimConfig):
        self.sim_config = sim_config
        self.plan = SwitchingPlan(provenance="oracle")

    def __call__(self, runner: StreamRunner, state: StreamState, task: Task) -> Tuple[int, Optional[SearchTrace]]:
        if task.task_id == runner.stream.T:
            return runner.default_ring_size(state), None
        budget = staged_budget(state.buffer)
        trace = global_bs(lambda a: replay_score(runner, state, task, a), budget, self.sim_config)
        self.plan.set_point(task.task_id, trace.chosen, budget)
        logger.info(f"Task {task.task_id}: oracle switching point {trace.chosen} of {budget}")
        return trace.chosen, trace


def offline_oracle_search(
    stream: TaskStream,
    capacity: int,
    train_config: TrainConfig,
    sim_config: SimConfig,
    seeds: SeedBundle,
    curriculum: bool = False,
    gamma: float = DEFAULT_GAMMA,
    learner: Optional[BaseLocalUpdate] = None,
) -> Tuple[StreamRun, SwitchingPlan]:
    """Offline switching-point search with the full stream available.

    Points are solved in task order with the same bisection as the online
    search; each candidate of task j is scored by replaying tasks j+1..T
    for real, reusing the points already solved.

    Returns:
        Tuple of (StreamRun, SwitchingPlan)
    """
    policy = MixedPolicy(curriculum=curriculum, gamma=gamma)
    runner = StreamRunner(stream, capacity, policy, train_config, seeds, learner)
    chooser = OracleChooser(sim_config)
    run = runner.run(choose_point=chooser)
    logger.info(f"Oracle run finished: average accuracy {run.average_accuracy:.4f}, plan {chooser.plan.points}")
    return run, chooser.plan
