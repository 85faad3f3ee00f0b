"""Switching plans, simulation settings and search traces."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from pseudo_tasks import METHODS, SynthesisSpec
from utils.errors import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)

PROVENANCES = ("oracle", "simulated", "static")
OBJECTIVES = ("accuracy", "loss")

# (min_stride, max_stride) per benchmark family
STRIDE_PRESETS: Dict[str, Tuple[int, int]] = {
    "pmnist": (20, 100),
    "scifar10": (10, 20),
    "scifar100": (40, 200),
    "tinyimagenet": (40, 200),
}


@dataclass
class SwitchingPlan:
    """Ring-full size a_j of every task whose memory has been built.

    Points are written once: a solved task is never revisited.
    """

    points: Dict[int, int] = field(default_factory=dict)
    provenance: str = "static"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ContractViolation(f"unknown plan provenance '{self.provenance}'")
        self.points = {int(j): int(a) for j, a in self.points.items()}
        for j, a in self.points.items():
            if a < 0:
                raise ContractViolation(f"negative ring size {a} for task {j}")

    def set_point(self, task_id: int, ring_size: int, budget: Optional[int] = None) -> None:
        """Record a_j for ``task_id``.

        Raises:
            ContractViolation: The task already has a point or ``ring_size`` is out of [0, budget]
        """
        if task_id in self.points:
            raise ContractViolation(f"switching point of task {task_id} is already fixed at {self.points[task_id]}")
        if ring_size < 0 or (budget is not None and ring_size > budget):
            raise ContractViolation(f"ring size {ring_size} outside [0, {budget}] for task {task_id}")
        self.points[int(task_id)] = int(ring_size)

    def get(self, task_id: int, default: int = 0) -> int:
        return self.points.get(task_id, default)

    def __contains__(self, task_id: int) -> bool:
        return task_id in self.points

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": {str(j): a for j, a in sorted(self.points.items())},
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SwitchingPlan":
        return cls({int(j): int(a) for j, a in data["points"].items()}, data.get("provenance", "static"))


@dataclass
class SimConfig:
    """Settings of the pseudo-task simulation and of the switching-point search.

    Attributes:
        window: Maximum number of pseudo-future tasks simulated per search
        pseudo_epochs: Training epochs per pseudo-task
        examples_per_pseudo_task: Rows per pseudo-task; the memory size when None
        min_stride: Smallest search stride
        max_stride: Largest search stride
        synthesis_method: permutation, rotation or blurring
        objective: accuracy (loss breaks ties) or loss
        workers: Threads evaluating neighbouring candidates; 1 evaluates in order
    """

    window: int = 10
    pseudo_epochs: int = 1
    examples_per_pseudo_task: Optional[int] = None
    min_stride: int = 20
    max_stride: int = 100
    synthesis_method: str = "permutation"
    objective: str = "accuracy"
    workers: int = 1
    rotation_step_degrees: float = 15.0
    blur_sigma_step: float = 0.5
    blur_kernel: int = 5

    def __post_init__(self):
        bad = []
        if self.window < 0:
            bad.append("window")
        if self.pseudo_epochs < 1:
            bad.append("pseudo_epochs")
        if self.examples_per_pseudo_task is not None and self.examples_per_pseudo_task < 1:
            bad.append("examples_per_pseudo_task")
        if self.min_stride < 1:
            bad.append("min_stride")
        if self.max_stride < self.min_stride:
            bad.append("max_stride")
        if self.synthesis_method not in METHODS:
            bad.append("synthesis_method")
        if self.objective not in OBJECTIVES:
            bad.append("objective")
        if self.workers < 1:
            bad.append("workers")
        if bad:
            raise ConfigurationError("invalid simulation settings", bad)

    def synthesis(self, count: int, capacity: int, seed: int) -> SynthesisSpec:
        return SynthesisSpec(
            method=self.synthesis_method,
            count=count,
            examples_per_task=self.examples_per_pseudo_task or capacity,
            seed=seed,
            rotation_step_degrees=self.rotation_step_degrees,
            blur_sigma_step=self.blur_sigma_step,
            blur_kernel=self.blur_kernel,
        )

    @classmethod
    def for_benchmark(cls, family: str, **overrides: Any) -> "SimConfig":
        if family not in STRIDE_PRESETS:
            raise ConfigurationError(f"no stride preset for '{family}'", ["stride_preset"])
        min_stride, max_stride = STRIDE_PRESETS[family]
        return cls(min_stride=min_stride, max_stride=max_stride, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "window": self.window,
            "pseudo_epochs": self.pseudo_epochs,
            "examples_per_pseudo_task": self.examples_per_pseudo_task,
            "min_stride": self.min_stride,
            "max_stride": self.max_stride,
            "synthesis_method": self.synthesis_method,
            "objective": self.objective,
            "workers": self.workers,
            "rotation_step_degrees": self.rotation_step_degrees,
            "blur_sigma_step": self.blur_sigma_step,
            "blur_kernel": self.blur_kernel,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimConfig":
        unknown = sorted(set(data) - set(cls().to_dict()))
        if unknown:
            raise ConfigurationError("unknown simulation fields", [f"simulation.{k}" for k in unknown])
        return cls(**data)


@dataclass
class SearchTrace:
    """Every candidate scored during one switching-point search.

    ``evaluated`` maps a candidate ring size to its (loss, accuracy);
    ``brackets`` lists the (low, mid, high) candidate of every bisection
    step. A degenerate trace (slot budget below the stride) has no
    evaluations and ``chosen`` equals the slot budget.
    """

    upper: int
    stride: int
    objective: str = "accuracy"
    evaluated: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    brackets: List[Tuple[int, int, int]] = field(default_factory=list)
    chosen: Optional[int] = None
    fallback_used: bool = False
    degenerate: bool = False

    def score_key(self, point: int) -> Tuple[float, float]:
        loss, accuracy = self.evaluated[point]
        if self.objective == "accuracy":
            return (accuracy, -loss)
        return (-loss, accuracy)

    def best_point(self) -> int:
        """Best evaluated candidate; the smallest one wins a tie."""
        return max(sorted(self.evaluated), key=self.score_key)

    @property
    def num_evaluations(self) -> int:
        return len(self.evaluated)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "upper": self.upper,
            "stride": self.stride,
            "objective": self.objective,
            "evaluated": {str(a): [loss, acc] for a, (loss, acc) in sorted(self.evaluated.items())},
            "brackets": [list(b) for b in self.brackets],
            "chosen": self.chosen,
            "fallback_used": self.fallback_used,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SearchTrace":
        return cls(
            upper=data["upper"],
            stride=data["stride"],
            objective=data["objective"],
            evaluated={int(a): (float(v[0]), float(v[1])) for a, v in data["evaluated"].items()},
            brackets=[tuple(b) for b in data["brackets"]],
            chosen=data["chosen"],
            fallback_used=data["fallback_used"],
            degenerate=data["degenerate"],
        )
