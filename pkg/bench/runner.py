"""Runs configured experiments and persists their results."""

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import psutil

from gps_engine import SwitchingPlan, global_loss, gps_run, offline_oracle_search
from memory import create_policy
from replay_trainer import StreamRun, run_stream
from task_streams import TaskStream
from utils.errors import IngestionError, ReportError
from utils.seeding import SeedBundle
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class RepeatResult:
    """Outcome of one seeded repeat.

    ``accuracy_matrix[i][j]`` is the accuracy of task j + 1 after training
    task i + 1, so row i has i + 1 entries.
    """

    repeat: int
    accuracy_matrix: List[List[float]]
    average_accuracy: float
    global_loss: float
    per_task_global_loss: List[float]
    plan: Optional[Dict[str, Any]] = None
    traces: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "repeat": self.repeat,
            "accuracy_matrix": self.accuracy_matrix,
            "average_accuracy": self.average_accuracy,
            "global_loss": self.global_loss,
            "per_task_global_loss": self.per_task_global_loss,
            "plan": self.plan,
            "traces": self.traces,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RepeatResult":
        return cls(**data)


@dataclass
class RunResult:
    """Aggregated result of an experiment; timing is kept apart so result files are reproducible."""

    name: str
    method: str
    benchmark: Dict[str, Any]
    config: Dict[str, Any]
    repeats: List[RepeatResult]
    mean_accuracy: float
    std_accuracy: float
    schema_version: int = SCHEMA_VERSION
    timing: Dict[str, Any] = field(default_factory=dict)

    def check(self) -> List[str]:
        """Consistency problems of the stored numbers; empty when sound."""
        problems = []
        for rep in self.repeats:
            for i, row in enumerate(rep.accuracy_matrix):
                if len(row) != i + 1:
                    problems.append(f"repeat {rep.repeat}: row {i + 1} has {len(row)} entries")
            if rep.accuracy_matrix and not np.isclose(np.mean(rep.accuracy_matrix[-1]), rep.average_accuracy):
                problems.append(f"repeat {rep.repeat}: stored average does not match the last row")
        averages = [rep.average_accuracy for rep in self.repeats]
        if averages and not np.isclose(np.mean(averages), self.mean_accuracy):
            problems.append("mean accuracy does not match the repeats")
        return problems

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "method": self.method,
            "benchmark": self.benchmark,
            "config": self.config,
            "repeats": [rep.to_dict() for rep in self.repeats],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunResult":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ReportError(f"unsupported result schema version {data.get('schema_version')}")
        return cls(
            name=data["name"],
            method=data["method"],
            benchmark=data["benchmark"],
            config=data["config"],
            repeats=[RepeatResult.from_dict(rep) for rep in data["repeats"]],
            mean_accuracy=data["mean_accuracy"],
            std_accuracy=data["std_accuracy"],
        )


def _run_method(config: ExperimentConfig, stream: TaskStream, seeds: SeedBundle) -> Tuple[StreamRun, Optional[SwitchingPlan]]:
    method = config.method
    if method in ("gps", "gps+cur"):
        return gps_run(
            stream,
            config.memory_size,
            config.train,
            config.simulation,
            seeds,
            curriculum=method == "gps+cur",
            gamma=config.curriculum_gamma(),
        )
    if method == "oracle":
        return offline_oracle_search(stream, config.memory_size, config.train, config.simulation, seeds)
    policy = create_policy(method, config.curriculum_gamma())
    run = run_stream(stream, config.memory_size, policy, config.train, seeds)
    return run, None


def run_repeat(config: ExperimentConfig, repeat: int) -> Tuple[RepeatResult, StreamRun]:
    seeds = SeedBundle(config.master_seed, repeat)
    stream = config.benchmark.build(seeds)
    run, plan = _run_method(config, stream, seeds)
    total, per_task = global_loss(run.params, stream)
    result = RepeatResult(
        repeat=repeat,
        accuracy_matrix=[[float(a) for a in row] for row in run.accuracy_matrix],
        average_accuracy=float(run.average_accuracy),
        global_loss=total,
        per_task_global_loss=[float(v) for v in per_task],
        plan=plan.to_dict() if plan is not None else None,
        traces={str(task_id): trace.to_dict() for task_id, trace in sorted(run.traces.items())},
    )
    return result, run


def run_experiment(config: ExperimentConfig, output_dir: Optional[str] = None, write: bool = True) -> RunResult:
    """Execute every repeat of ``config`` and aggregate mean and std of the average accuracy.

    Args:
        config: Validated experiment config
        output_dir: Overrides ``config.output_dir``
        write: Write the result, accuracy CSV and timing sidecar

    Returns:
        RunResult
    """
    process = psutil.Process()
    peak_rss = process.memory_info().rss
    repeats, timings = [], []
    for repeat in range(config.repeats):
        started = time.perf_counter()
        result, run = run_repeat(config, repeat)
        peak_rss = max(peak_rss, process.memory_info().rss)
        repeats.append(result)
        timings.append({
            "repeat": repeat,
            "wall_seconds": time.perf_counter() - started,
            "train_seconds": run.train_seconds,
            "search_seconds": run.search_seconds,
        })
        logger.info(f"{config.name} repeat {repeat + 1}/{config.repeats}: average accuracy {result.average_accuracy:.4f}")
    averages = np.array([rep.average_accuracy for rep in repeats])
    result = RunResult(
        name=config.name,
        method=config.method,
        benchmark=config.benchmark.identity(),
        config=config.to_dict(),
        repeats=repeats,
        mean_accuracy=float(averages.mean()),
        std_accuracy=float(averages.std()),
        timing={"repeats": timings, "peak_rss_mb": peak_rss / (1024 * 1024)},
    )
    logger.info(
        f"{config.name} ({config.method}): {100 * result.mean_accuracy:.2f} +- {100 * result.std_accuracy:.2f}"
    )
    if write:
        write_result(result, output_dir or config.output_dir)
    return result


def result_paths(name: str, directory: str) -> Dict[str, str]:
    return {
        "result": os.path.join(directory, f"{name}.json"),
        "accuracy": os.path.join(directory, f"{name}.accuracy.csv"),
        "timing": os.path.join(directory, f"{name}.timing.json"),
    }


def write_result(result: RunResult, directory: str) -> Dict[str, str]:
    """Write the result JSON, the accuracy matrix CSV and the timing sidecar.

    Returns:
        Paths written, keyed by kind
    """
    os.makedirs(directory, exist_ok=True)
    paths = result_paths(result.name, directory)
    with open(paths["result"], "w") as f:
        json.dump(result.to_dict(), f, sort_keys=True, indent=2)
        f.write("\n")
    with open(paths["accuracy"], "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["repeat", "after_task", "task", "accuracy"])
        for rep in result.repeats:
            for i, row in enumerate(rep.accuracy_matrix, start=1):
                for j, accuracy in enumerate(row, start=1):
                    writer.writerow([rep.repeat, i, j, repr(accuracy)])
    with open(paths["timing"], "w") as f:
        json.dump(result.timing, f, sort_keys=True, indent=2)
    logger.info(f"Wrote {paths['result']}")
    return paths


def read_result(path: str) -> RunResult:
    """Load a result JSON written by ``write_result``; the timing sidecar is attached when present."""
    if not os.path.exists(path):
        raise IngestionError("result file not found", path=path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise IngestionError(f"invalid JSON: {e.msg}", path=path, offset=e.pos) from e
    result = RunResult.from_dict(data)
    timing_path = path[:-len(".json")] + ".timing.json" if path.endswith(".json") else None
    if timing_path and os.path.exists(timing_path):
        with open(timing_path, "r") as f:
            result.timing = json.load(f)
    return result
