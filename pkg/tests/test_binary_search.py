import math
import os
import sys
from unittest.mock import MagicMock

import numpy as np
import pytest

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from gps_engine import (
    SearchTrace,
    SimConfig,
    SwitchingPlan,
    candidate_grid,
    global_bs,
    search_stride,
    stride_bisection,
)
from utils.errors import ConfigurationError, ContractViolation


def peak_at(peak):
    """Accuracy falling off linearly around ``peak``; loss mirrors it."""
    def score(a):
        distance = abs(a - peak)
        return float(distance), -float(distance)
    return score


def evaluation_bound(upper, stride):
    return 2 * math.ceil(math.log2(max(2, upper / stride))) + 3


def test_stride_is_clamped():
    assert search_stride(1000, 20, 100) == 100
    assert search_stride(250, 20, 100) == 50
    assert search_stride(50, 20, 100) == 20
    assert search_stride(20, 10, 20) == 10


def test_candidate_grid_ends_at_upper():
    assert candidate_grid(25, 10) == [0, 10, 20, 25]
    assert candidate_grid(20, 10) == [0, 10, 20]
    assert candidate_grid(7, 7) == [0, 7]


def test_unimodal_profiles_are_solved_within_a_stride():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(500):
        upper = int(rng.integers(20, 1001))
        stride = search_stride(upper, 20, 100)
        peak = int(rng.integers(0, upper + 1))
        trace = stride_bisection(peak_at(peak), upper, stride)
        assert trace.num_evaluations <= evaluation_bound(upper, stride)
        if abs(trace.chosen - peak) <= stride:
            hits += 1
    assert hits / 500 >= 0.99


def test_interior_peak_is_found_exactly():
    trace = stride_bisection(peak_at(40), 100, 10)
    assert trace.chosen == 40
    assert not trace.fallback_used
    assert trace.chosen in trace.evaluated


def test_monotone_profile_ends_at_the_boundary():
    trace = stride_bisection(lambda a: (1.0 / (a + 1), a / 100.0), 100, 10)
    assert trace.chosen == 100
    assert trace.fallback_used
    trace = stride_bisection(lambda a: (float(a), -float(a)), 100, 10)
    assert trace.chosen == 0


def test_constant_profile_terminates_on_smallest_point():
    score = MagicMock(return_value=(0.5, 0.7))
    trace = stride_bisection(score, 100, 20)
    assert trace.num_evaluations == 3
    assert score.call_count == 3
    assert trace.chosen == min(trace.evaluated)
    assert trace.fallback_used


def test_loss_breaks_accuracy_ties():
    table = {0: (0.9, 0.5), 10: (0.4, 0.5), 20: (0.6, 0.5)}
    trace = stride_bisection(lambda a: table[a], 20, 10)
    assert trace.chosen == 10
    loss_trace = stride_bisection(lambda a: (table[a][0], -table[a][0]), 20, 10, objective="loss")
    assert loss_trace.chosen == 10


def test_candidates_are_scored_once():
    score = MagicMock(side_effect=peak_at(73))
    trace = stride_bisection(score, 200, 10)
    points = [call.args[0] for call in score.call_args_list]
    assert len(points) == len(set(points)) == trace.num_evaluations


def test_small_budget_is_degenerate():
    score = MagicMock()
    trace = stride_bisection(score, 5, 10)
    assert trace.degenerate
    assert trace.chosen == 5
    assert trace.evaluated == {}
    score.assert_not_called()


def test_parallel_workers_give_the_same_trace():
    serial = stride_bisection(peak_at(333), 1000, 100)
    parallel = stride_bisection(peak_at(333), 1000, 100, workers=3)
    assert parallel.evaluated == serial.evaluated
    assert parallel.brackets == serial.brackets
    assert parallel.chosen == serial.chosen


def test_global_bs_uses_configured_stride():
    trace = global_bs(peak_at(30), 60, SimConfig(min_stride=4, max_stride=8))
    assert trace.stride == 8
    assert trace.chosen in (24, 32)
    small = global_bs(peak_at(0), 3, SimConfig(min_stride=4, max_stride=8))
    assert small.degenerate and small.chosen == 3


def test_trace_round_trips_through_dict():
    trace = stride_bisection(peak_at(12), 50, 10)
    assert SearchTrace.from_dict(trace.to_dict()) == trace


def test_switching_plan_points_are_write_once():
    plan = SwitchingPlan()
    plan.set_point(1, 3, budget=5)
    assert 1 in plan and plan.get(1) == 3 and plan.get(2) == 0
    with pytest.raises(ContractViolation):
        plan.set_point(1, 2)
    with pytest.raises(ContractViolation):
        plan.set_point(2, 6, budget=5)
    with pytest.raises(ContractViolation):
        SwitchingPlan(provenance="guessed")
    assert SwitchingPlan.from_dict(plan.to_dict()).points == {1: 3}


def test_sim_config_validation_and_presets():
    with pytest.raises(ConfigurationError) as info:
        SimConfig(window=-1, min_stride=5, max_stride=4, objective="f1")
    assert info.value.fields == ["window", "max_stride", "objective"]
    with pytest.raises(ConfigurationError) as info:
        SimConfig.from_dict({"window": 2, "stride": 3})
    assert info.value.fields == ["simulation.stride"]
    preset = SimConfig.for_benchmark("scifar10", window=3)
    assert (preset.min_stride, preset.max_stride, preset.window) == (10, 20, 3)
    assert preset.synthesis(2, 50, seed=1).examples_per_task == 50


def strictly_unimodal_table(rng, grid):
    """Distinct scores rising to one grid point and falling after it."""
    peak = int(rng.integers(0, len(grid)))
    steps = rng.uniform(0.01, 1.0, size=len(grid))
    accuracy = np.zeros(len(grid))
    for k in range(peak - 1, -1, -1):
        accuracy[k] = accuracy[k + 1] - steps[k]
    for k in range(peak + 1, len(grid)):
        accuracy[k] = accuracy[k - 1] - steps[k]
    return {a: (-float(acc), float(acc)) for a, acc in zip(grid, accuracy)}, grid[peak]


def test_strictly_unimodal_grids_give_the_exhaustive_best():
    rng = np.random.default_rng(21)
    for _ in range(300):
        upper = int(rng.integers(1, 301))
        stride = int(rng.integers(1, upper + 1))
        grid = candidate_grid(upper, stride)
        table, best = strictly_unimodal_table(rng, grid)
        trace = stride_bisection(lambda a: table[a], upper, stride)
        assert trace.chosen == best == max(grid, key=lambda a: table[a][1])
