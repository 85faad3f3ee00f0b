"""Experiment configuration files.

A configuration is a JSON object whose field names mirror
``ExperimentConfig``. Unknown fields are rejected at every level and all
problems are reported together in one ``ConfigurationError``.
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from gps_engine import SimConfig
from memory import DEFAULT_GAMMA, DEFAULT_RING_GAMMA
from nn_core import TrainConfig
from task_streams import (
    SyntheticStreamSpec,
    TaskStream,
    build_permuted_stream,
    build_split_stream,
    build_synthetic_stream,
    load_mnist,
)
from utils.errors import ConfigurationError, IngestionError
from utils.seeding import SeedBundle

logger = logging.getLogger(__name__)

METHODS = (
    "er-res",
    "er-ring-full",
    "er-hybrid",
    "er-cur-res",
    "er-cur-ring-full",
    "gps",
    "oracle",
    "gps+cur",
)
BENCHMARK_KINDS = ("permuted-mnist", "split-mnist", "synthetic")
PRESET_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "presets")


def _unknown(data: Dict[str, Any], allowed: List[str], prefix: str) -> List[str]:
    return [f"{prefix}{key}" for key in sorted(set(data) - set(allowed))]

NUMBER = (int, float)

# Expected JSON types per section; fields listed in NULLABLE may also be null.
FIELD_TYPES: Dict[str, Dict[str, Any]] = {
    "": {
        "name": str, "method": str, "benchmark": dict, "memory_size": int, "train": dict,
        "simulation": dict, "gamma": NUMBER, "repeats": int, "master_seed": int, "output_dir": str,
    },
    "benchmark.": {
        "kind": str, "num_tasks": int, "subsample": NUMBER, "data_root": str,
        "classes_per_task": int, "synthetic": dict,
    },
    "benchmark.synthetic.": {
        "num_tasks": int, "num_classes": int, "dim": int, "train_per_task": int, "test_fraction": NUMBER,
        "means": list, "mean_scale": NUMBER, "cluster_std": (int, float, list), "class_frequencies": list,
        "task_variation": str, "image_shape": list, "seed": int, "domain_mode": bool,
    },
    "train.": {
        "learning_rate": NUMBER, "epochs": int, "batch_size": int, "lambda": NUMBER,
        "hidden_sizes": list, "rng_seed": int,
    },
    "simulation.": {
        "window": int, "pseudo_epochs": int, "examples_per_pseudo_task": int, "min_stride": int,
        "max_stride": int, "synthesis_method": str, "objective": str, "workers": int,
        "rotation_step_degrees": NUMBER, "blur_sigma_step": NUMBER, "blur_kernel": int,
    },
}
NULLABLE = {
    "gamma", "benchmark.data_root", "simulation.examples_per_pseudo_task", "benchmark.synthetic.means",
    "benchmark.synthetic.class_frequencies", "benchmark.synthetic.image_shape",
}


def _has_type(value: Any, expected: Any) -> bool:
    if isinstance(value, bool):
        return expected is bool
    return isinstance(value, expected)


def _wrong_types(data: Dict[str, Any], prefix: str) -> List[str]:
    """Fields of ``data`` whose JSON type does not match the section's table."""
    bad = []
    for key, expected in FIELD_TYPES[prefix].items():
        if key not in data:
            continue
        value = data[key]
        if value is None:
            if f"{prefix}{key}" not in NULLABLE:
                bad.append(f"{prefix}{key}")
        elif not _has_type(value, expected):
            bad.append(f"{prefix}{key}")
        elif key == "hidden_sizes" and not all(_has_type(h, int) for h in value):
            bad.append(f"{prefix}{key}")
    return bad


def _section_problems(data: Dict[str, Any], prefix: str, allowed: List[str]) -> List[str]:
    return _unknown(data, allowed, prefix) + _wrong_types(data, prefix)


@dataclass
class BenchmarkSpec:
    """Which task stream to build.

    Attributes:
        kind: permuted-mnist, split-mnist or synthetic
        num_tasks: Number of tasks (permuted streams)
        subsample: Fraction of the MNIST training split kept
        data_root: MNIST directory; ``$GPS_DATA_ROOT`` when None
        classes_per_task: Group size of split streams
        synthetic: Fields of ``SyntheticStreamSpec``
    """

    kind: str = "permuted-mnist"
    num_tasks: int = 10
    subsample: float = 1.0
    data_root: Optional[str] = None
    classes_per_task: int = 2
    synthetic: Dict[str, Any] = field(default_factory=dict)

    def identity(self) -> Dict[str, Any]:
        """Fields that decide whether two results are comparable."""
        ident = {"kind": self.kind, "num_tasks": self.effective_num_tasks(), "subsample": self.subsample}
        if self.kind == "split-mnist":
            ident["classes_per_task"] = self.classes_per_task
        if self.kind == "synthetic":
            ident["synthetic"] = self.synthetic_spec(0).to_dict()
        return ident

    def effective_num_tasks(self) -> int:
        if self.kind == "synthetic":
            return int(self.synthetic.get("num_tasks", SyntheticStreamSpec.num_tasks))
        if self.kind == "split-mnist":
            return 10 // self.classes_per_task
        return self.num_tasks

    def synthetic_spec(self, seed: int) -> SyntheticStreamSpec:
        values = dict(self.synthetic)
        values.setdefault("seed", seed)
        if values.get("image_shape") is not None:
            values["image_shape"] = tuple(values["image_shape"])
        return SyntheticStreamSpec(**values)

    def validate(self) -> List[str]:
        bad = []
        if self.kind not in BENCHMARK_KINDS:
            bad.append("benchmark.kind")
        if self.num_tasks < 1:
            bad.append("benchmark.num_tasks")
        if not 0.0 < self.subsample <= 1.0:
            bad.append("benchmark.subsample")
        if self.kind == "split-mnist" and (self.classes_per_task < 1 or 10 % self.classes_per_task):
            bad.append("benchmark.classes_per_task")
        if self.kind == "synthetic":
            allowed = [f.name for f in dataclasses.fields(SyntheticStreamSpec)]
            unknown = _unknown(self.synthetic, allowed, "benchmark.synthetic.")
            bad.extend(unknown)
            if not unknown:
                try:
                    self.synthetic_spec(0).validate()
                except ConfigurationError as e:
                    bad.extend(f"benchmark.synthetic.{name}" for name in e.fields)
        return bad

    def build(self, seeds: SeedBundle) -> TaskStream:
        """Build the task stream of one repeat."""
        if self.kind == "synthetic":
            return build_synthetic_stream(self.synthetic_spec(seeds.seed("data")))
        base = load_mnist(self.data_root, self.subsample, seeds.seed("data"))
        if self.kind == "split-mnist":
            return build_split_stream(base, self.classes_per_task, name="split-mnist")
        return build_permuted_stream(base, self.num_tasks, seeds.benchmark_seeds(self.num_tasks), name="permuted-mnist")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "num_tasks": self.num_tasks,
            "subsample": self.subsample,
            "data_root": self.data_root,
            "classes_per_task": self.classes_per_task,
            "synthetic": dict(self.synthetic),
        }


@dataclass
class ExperimentConfig:
    """One experiment: a benchmark, a method and its settings, repeated with derived seeds."""

    name: str
    method: str
    benchmark: BenchmarkSpec
    memory_size: int = 1000
    train: TrainConfig = field(default_factory=TrainConfig)
    simulation: SimConfig = field(default_factory=SimConfig)
    gamma: Optional[float] = None
    repeats: int = 1
    master_seed: int = 0
    output_dir: str = "results"

    def curriculum_gamma(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return DEFAULT_RING_GAMMA if self.method == "er-cur-ring-full" else DEFAULT_GAMMA

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "method": self.method,
            "benchmark": self.benchmark.to_dict(),
            "memory_size": self.memory_size,
            "train": self.train.to_dict(),
            "simulation": self.simulation.to_dict(),
            "gamma": self.gamma,
            "repeats": self.repeats,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Validate and build a config.

        A section is only built once its fields have known names and the
        right JSON types, so every problem ends up in one error.

        Raises:
            ConfigurationError: Listing every offending field
        """
        bad = _section_problems(data, "", [f.name for f in dataclasses.fields(cls)])
        for required in ("name", "method", "benchmark"):
            if required not in data:
                bad.append(required)
        method = data.get("method")
        if isinstance(method, str) and method not in METHODS:
            bad.append("method")

        benchmark = BenchmarkSpec()
        bench_data = data.get("benchmark", {})
        if isinstance(bench_data, dict):
            bench_bad = _section_problems(bench_data, "benchmark.", [f.name for f in dataclasses.fields(BenchmarkSpec)])
            synthetic = bench_data.get("synthetic")
            if isinstance(synthetic, dict):
                bench_bad.extend(_wrong_types(synthetic, "benchmark.synthetic."))
            bad.extend(bench_bad)
            if not bench_bad:
                benchmark = BenchmarkSpec(**bench_data)
                bad.extend(benchmark.validate())

        train = TrainConfig()
        train_data = data.get("train", {})
        if isinstance(train_data, dict):
            train_bad = _section_problems(train_data, "train.", list(TrainConfig().to_dict()))
            bad.extend(train_bad)
            if not train_bad:
                try:
                    train = TrainConfig.from_dict(train_data)
                except ConfigurationError as e:
                    bad.extend(f"train.{name}" for name in e.fields)

        simulation = SimConfig()
        sim_data = data.get("simulation", {})
        if isinstance(sim_data, dict):
            sim_bad = _section_problems(sim_data, "simulation.", list(SimConfig().to_dict()))
            bad.extend(sim_bad)
            if not sim_bad:
                try:
                    simulation = SimConfig.from_dict(sim_data)
                except ConfigurationError as e:
                    bad.extend(name if name.startswith("simulation.") else f"simulation.{name}" for name in e.fields)

        memory_size = data.get("memory_size", 1000)
        if _has_type(memory_size, int):
            if memory_size < 1:
                bad.append("memory_size")
            elif not any(name.startswith("benchmark") for name in bad) and memory_size < benchmark.effective_num_tasks():
                bad.append("memory_size")
        gamma = data.get("gamma")
        if _has_type(gamma, NUMBER) and not 0.0 < gamma <= 1.0:
            bad.append("gamma")
        repeats = data.get("repeats", 1)
        if _has_type(repeats, int) and repeats < 1:
            bad.append("repeats")
        master_seed = data.get("master_seed", 0)
        if _has_type(master_seed, int) and master_seed < 0:
            bad.append("master_seed")
        if bad:
            raise ConfigurationError("invalid experiment config", sorted(set(bad)))
        return cls(
            name=data["name"],
            method=method,
            benchmark=benchmark,
            memory_size=memory_size,
            train=train,
            simulation=simulation,
            gamma=gamma,
            repeats=repeats,
            master_seed=master_seed,
            output_dir=data.get("output_dir", "results"),
        )


def load_config(path: str) -> ExperimentConfig:
    """Read a config file; a bare name like ``pmnist-ci`` resolves to a shipped preset.

    Raises:
        IngestionError: File missing or not valid JSON
        ConfigurationError: Invalid fields
    """
    if not os.path.exists(path):
        preset = os.path.join(PRESET_DIR, path if path.endswith(".json") else f"{path}.json")
        if not os.path.exists(preset):
            raise IngestionError("config file not found", path=path)
        path = preset
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise IngestionError(f"invalid JSON: {e.msg}", path=path, offset=e.pos) from e
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object", ["<root>"])
    config = ExperimentConfig.from_dict(data)
    logger.info(f"Loaded config '{config.name}' ({config.method}) from {path}")
    return config
