import logging
from typing import Optional, Tuple

from memory import DEFAULT_GAMMA, MixedPolicy
from nn_core import TrainConfig
from pseudo_tasks import synthesize_sequence
from replay_trainer import BaseLocalUpdate, StreamRun, StreamRunner, StreamState
from task_streams import Task, TaskStream
from utils.seeding import SeedBundle
from .binary_search import global_bs
from .plan import SearchTrace, SimConfig, SwitchingPlan
from .simulation import GlobalSimulator

logger = logging.getLogger(__name__)


class PseudoTaskChooser:
    """Fixes the ring size of each real task by searching on simulated forgetting.

    Used as the ``choose_point`` callback of ``StreamRunner.run``. The last
    task keeps the policy default since no task follows it.
    """

    def __init__(self, sim_config: SimConfig, plan: Optional[SwitchingPlan] = None):
        self.sim_config = sim_config
        self.plan = plan if plan is not None else SwitchingPlan(provenance="simulated")

    def __call__(self, runner: StreamRunner, state: StreamState, task: Task) -> Tuple[int, Optional[SearchTrace]]:
        remaining = runner.stream.T - task.task_id
        if remaining == 0:
            return runner.default_ring_size(state), None
        count = min(self.sim_config.window, remaining)
        pseudo_tasks = []
        if count:
            synthesis = self.sim_config.synthesis(
                count, runner.capacity, runner.seeds.seed("simulation", task.task_id, 1)
            )
            pseudo_tasks = synthesize_sequence(task, synthesis, first_task_id=runner.stream.T + 1)
        simulator = GlobalSimulator(
            task,
            pseudo_tasks,
            runner.learner,
            state.params,
            state.buffer,
            state.plan_points,
            self.sim_config,
            runner.train_config,
            runner.seeds.simulation_seed(task.task_id),
            runner.class_table,
        )
        trace = global_bs(simulator, simulator.budget, self.sim_config)
        self.plan.set_point(task.task_id, trace.chosen, simulator.budget)
        logger.info(
            f"Task {task.task_id}: switching point {trace.chosen} of {simulator.budget} "
            f"({trace.num_evaluations} simulations over {count} pseudo-tasks)"
        )
        return trace.chosen, trace


def gps_run(
    stream: TaskStream,
    capacity: int,
    train_config: TrainConfig,
    sim_config: SimConfig,
    seeds: SeedBundle,
    curriculum: bool = False,
    gamma: float = DEFAULT_GAMMA,
    learner: Optional[BaseLocalUpdate] = None,
) -> Tuple[StreamRun, SwitchingPlan]:
    """Train the stream online, choosing every switching point by pseudo-task simulation.

    Args:
        stream: Real task sequence
        capacity: Memory size |M|
        train_config: Optimisation settings
        sim_config: Simulation and search settings
        seeds: Named seeds of this repeat
        curriculum: Use the curriculum variants for both memory parts
        gamma: Curriculum pool fraction
        learner: Local updating method (experience replay by default)

    Returns:
        Tuple of (StreamRun, SwitchingPlan)
    """
    policy = MixedPolicy(curriculum=curriculum, gamma=gamma)
    runner = StreamRunner(stream, capacity, policy, train_config, seeds, learner)
    chooser = PseudoTaskChooser(sim_config)
    run = runner.run(choose_point=chooser)
    plan = chooser.plan
    logger.info(f"GPS run finished: average accuracy {run.average_accuracy:.4f}, plan {plan.points}")
    return run, plan
