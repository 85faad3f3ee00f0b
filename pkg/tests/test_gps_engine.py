import math
import os
import sys
from unittest.mock import patch

import numpy as np
import pytest

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gps_engine import (
    GlobalSimulator,
    SimConfig,
    global_loss,
    global_sim,
    gps_run,
    is_unimodal,
    staged_budget,
    unimodal_fraction,
)
from memory import MemoryBuffer, MixedPolicy, ReservoirPolicy, RingFullPolicy
from nn_core import TrainConfig
from pseudo_tasks import SynthesisSpec, synthesize_sequence
from replay_trainer import StreamRunner, evaluate_task, run_stream
from task_streams import SyntheticStreamSpec, Task, TaskSplit, build_split_stream, build_synthetic_stream
from utils.errors import ContractViolation
from utils.seeding import SeedBundle


@pytest.fixture
def stream():
    spec = SyntheticStreamSpec(num_tasks=4, num_classes=3, dim=6, train_per_task=36, task_variation="permute", seed=5)
    yield build_synthetic_stream(spec)


@pytest.fixture
def config():
    yield TrainConfig(learning_rate=0.1, epochs=1, batch_size=6, hidden_sizes=(8,))


@pytest.fixture
def sim_config():
    yield SimConfig(window=2, min_stride=2, max_stride=4)


@pytest.fixture
def trained(stream, config):
    """Runner state right after training task 1, before its memory is committed."""
    runner = StreamRunner(stream, 20, MixedPolicy(), config, SeedBundle(1))
    state = runner.start()
    runner.train_task(state, stream.task(1))
    yield runner, state


def make_simulator(runner, state, sim_config, count=2):
    task = runner.stream.task(1)
    pseudo = synthesize_sequence(task, SynthesisSpec(count=count, examples_per_task=20, seed=3), first_task_id=runner.stream.T + 1) if count else []
    return GlobalSimulator(
        task, pseudo, runner.learner, state.params, state.buffer, state.plan_points,
        sim_config, runner.train_config, seed=11, class_table=runner.class_table,
    )


def test_staged_budget_needs_a_staged_task():
    with pytest.raises(ContractViolation):
        staged_budget(MemoryBuffer(5))


def test_simulation_is_deterministic_and_leaves_state_alone(trained, sim_config):
    runner, state = trained
    before = state.params.snapshot()
    staged = len(state.buffer.staging.reservoir)
    simulator = make_simulator(runner, state, sim_config)
    first = simulator(8)
    second = simulator(8)
    assert first == second
    assert state.params.equals(before)
    assert state.buffer.staging is not None
    assert len(state.buffer.staging.reservoir) == staged
    assert state.buffer.slots == {}


def test_simulation_trains_the_pseudo_tasks(trained, sim_config):
    runner, state = trained
    loss, accuracy = make_simulator(runner, state, sim_config)(0)
    untouched_accuracy, untouched_loss = evaluate_task(state.params, runner.stream.task(1))
    assert 0.0 <= accuracy <= 1.0
    assert math.isfinite(loss)
    assert loss != untouched_loss


def test_without_pseudo_tasks_every_candidate_scores_the_same(trained, sim_config):
    runner, state = trained
    simulator = make_simulator(runner, state, sim_config, count=0)
    accuracy, loss = evaluate_task(state.params, runner.stream.task(1))
    assert simulator(0) == simulator(20) == (loss, accuracy)


def test_candidate_outside_budget_is_rejected(trained, sim_config):
    runner, state = trained
    simulator = make_simulator(runner, state, sim_config)
    assert simulator.budget == 20
    for candidate in (-1, 21):
        with pytest.raises(ContractViolation):
            simulator(candidate)


def test_global_sim_matches_simulator(trained, sim_config):
    runner, state = trained
    task = runner.stream.task(1)
    pseudo = synthesize_sequence(task, SynthesisSpec(count=2, examples_per_task=20, seed=3), first_task_id=runner.stream.T + 1)
    direct = global_sim(
        12, task, pseudo, runner.learner, state.params, state.buffer, state.plan_points,
        sim_config, runner.train_config, 11,
    )
    assert direct == make_simulator(runner, state, sim_config)(12)


def test_task_incremental_simulation_extends_class_table(config, sim_config):
    labels = np.tile(np.arange(4), 15)
    features = np.random.default_rng(2).normal(size=(60, 4))
    dataset = Task(1, TaskSplit(features[:40], labels[:40], np.arange(40)),
                   TaskSplit(features[40:], labels[40:], np.arange(40, 60)), (0, 1, 2, 3))
    split = build_split_stream(dataset, 2)
    runner = StreamRunner(split, 10, MixedPolicy(), config, SeedBundle(0))
    state = runner.start()
    runner.train_task(state, split.task(1))
    simulator = make_simulator(runner, state, sim_config, count=1)
    assert simulator.class_table == {1: (0, 1), 2: (2, 3), 3: (0, 1)}
    loss, accuracy = simulator(5)
    assert 0.0 <= accuracy <= 1.0


def test_boundary_plans_match_the_pure_policies(stream, config):
    seeds = SeedBundle(4)
    all_zero = run_stream(stream, 40, MixedPolicy(), config, seeds, choose_point=lambda r, s, t: (0, None))
    reservoir = run_stream(stream, 40, ReservoirPolicy(), config, seeds)
    assert all_zero.params.equals(reservoir.params)
    assert all_zero.accuracy_matrix == reservoir.accuracy_matrix

    def fill_ring(runner, state, task):
        return staged_budget(state.buffer), None

    all_ring = run_stream(stream, 40, MixedPolicy(), config, seeds, choose_point=fill_ring)
    ring = run_stream(stream, 40, RingFullPolicy(), config, seeds)
    assert all_ring.plan_points == ring.plan_points == {1: 40, 2: 20, 3: 13, 4: 10}
    assert all_ring.params.equals(ring.params)
    assert all_ring.accuracy_matrix == ring.accuracy_matrix


def test_gps_run_solves_every_task_but_the_last(stream, config, sim_config):
    run, plan = gps_run(stream, 20, config, sim_config, SeedBundle(0))
    assert plan.provenance == "simulated"
    assert sorted(plan.points) == [1, 2, 3]
    assert sorted(run.traces) == [1, 2, 3]
    for task_id, trace in run.traces.items():
        assert trace.chosen == plan.points[task_id] == run.plan_points[task_id]
        assert 0 <= trace.chosen <= trace.upper
        assert trace.num_evaluations <= 2 * math.ceil(math.log2(max(2, trace.upper / trace.stride))) + 3
    assert run.plan_points[4] == 0
    assert len(run.accuracy_matrix) == 4


def test_gps_run_is_deterministic(stream, config, sim_config):
    first, first_plan = gps_run(stream, 20, config, sim_config, SeedBundle(2))
    second, second_plan = gps_run(stream, 20, config, sim_config, SeedBundle(2))
    assert first_plan.points == second_plan.points
    assert first.accuracy_matrix == second.accuracy_matrix


def test_single_task_stream_gives_empty_plan(config, sim_config):
    single = build_synthetic_stream(SyntheticStreamSpec(num_tasks=1, dim=4, train_per_task=20, seed=0))
    run, plan = gps_run(single, 10, config, sim_config, SeedBundle(0))
    assert len(plan) == 0
    assert run.traces == {}


def test_zero_window_scores_every_candidate_alike(stream, config):
    run, plan = gps_run(stream, 20, config, SimConfig(window=0, min_stride=2, max_stride=4), SeedBundle(0))
    for task_id, trace in run.traces.items():
        assert len(set(trace.evaluated.values())) == 1
        assert trace.fallback_used
        assert plan.points[task_id] == min(trace.evaluated)


def test_gps_with_curriculum_runs(stream, config, sim_config):
    run, plan = gps_run(stream, 20, TrainConfig(epochs=2, batch_size=6, hidden_sizes=(8,)), sim_config,
                        SeedBundle(0), curriculum=True, gamma=0.6)
    assert sorted(plan.points) == [1, 2, 3]


def test_global_loss_sums_task_losses(stream, config):
    run = run_stream(stream, 20, ReservoirPolicy(), config, SeedBundle(0))
    total, per_task = global_loss(run.params, stream)
    assert len(per_task) == 4
    assert total == pytest.approx(sum(evaluate_task(run.params, t)[1] for t in stream.tasks))


def test_unimodality_checks():
    assert is_unimodal([3, 2, 1, 2, 3])
    assert is_unimodal([1, 1, 1])
    assert not is_unimodal([1, 2, 1, 2])
    assert is_unimodal([1.0, 1.05, 1.0, 2.0], tolerance=0.1)
    assert is_unimodal([0.1, 0.5, 0.3], shape="peak")
    assert not is_unimodal([0.5, 0.1, 0.3], shape="peak")
    assert unimodal_fraction([[1, 0, 1], [0, 1, 0, 1]]) == 0.5
    assert unimodal_fraction([]) == 0.0


def test_clashing_pseudo_task_ids_are_rejected(trained, sim_config):
    runner, state = trained
    task = runner.stream.task(1)
    pseudo = synthesize_sequence(task, SynthesisSpec(count=2, examples_per_task=20, seed=3), first_task_id=1)
    with pytest.raises(ContractViolation):
        GlobalSimulator(task, pseudo, runner.learner, state.params, state.buffer, state.plan_points,
                        sim_config, runner.train_config, seed=11, class_table=runner.class_table)


def test_gps_numbers_pseudo_tasks_after_the_real_stream(stream, config, sim_config):
    with patch("gps_engine.gps.synthesize_sequence", wraps=synthesize_sequence) as synthesize:
        gps_run(stream, 20, config, sim_config, SeedBundle(0))
    assert synthesize.call_count == 3
    for call in synthesize.call_args_list:
        assert call.kwargs["first_task_id"] == stream.T + 1


def swapping_pseudo_tasks(task, count):
    """Seeded pseudo-tasks of a two-feature task that all swap the features."""
    for seed in range(100):
        spec = SynthesisSpec(count=count, examples_per_task=len(task.train), seed=seed)
        pseudo = synthesize_sequence(task, spec, first_task_id=3)
        if all(np.array_equal(p.train.inputs, task.train.inputs[:, ::-1]) for p in pseudo):
            return pseudo
    raise AssertionError("no seed swaps every pseudo-task")


def test_simulated_future_makes_the_task_forget():
    spec = SyntheticStreamSpec(num_tasks=2, num_classes=2, dim=2, train_per_task=60,
                               means=[[3.0, 0.0], [0.0, 3.0]], seed=8)
    stream = build_synthetic_stream(spec)
    config = TrainConfig(learning_rate=0.1, epochs=5, batch_size=5, lam=0.5, hidden_sizes=(8,))
    runner = StreamRunner(stream, 20, MixedPolicy(), config, SeedBundle(3))
    state = runner.start()
    task = stream.task(1)
    runner.train_task(state, task)
    before, _ = evaluate_task(state.params, task)

    pseudo = swapping_pseudo_tasks(task, 2)
    sim = SimConfig(window=2, pseudo_epochs=5, min_stride=2, max_stride=4)
    _, after = global_sim(0, task, pseudo, runner.learner, state.params, state.buffer, state.plan_points,
                          sim, config, 11)
    assert before > 0.8
    assert after < before
