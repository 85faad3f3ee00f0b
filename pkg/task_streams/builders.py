"""Task-sequence builders: permuted, split and synthetic streams."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import ConfigurationError
from .types import Task, TaskSplit, TaskStream

logger = logging.getLogger(__name__)


def make_permutation(seed: int, width: int) -> np.ndarray:
    """The pixel permutation generated by ``seed``."""
    return np.random.default_rng(seed).permutation(width)


def subsample_task(task: Task, fraction: float, seed: int) -> Task:
    """Keep a seeded random fraction of the training rows (test rows are untouched)."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError("subsample fraction must lie in (0, 1]", ["subsample"])
    if fraction == 1.0:
        return task
    rng = np.random.default_rng(seed)
    keep = max(1, int(round(fraction * len(task.train))))
    idx = np.sort(rng.choice(len(task.train), size=keep, replace=False))
    logger.debug(f"Subsampled task {task.task_id} to {keep} of {len(task.train)} training rows")
    return Task(task.task_id, task.train.subset(idx), task.test, task.class_ids, task.image_shape)


def build_permuted_stream(base: Task, num_tasks: int, seeds: Sequence[int], name: str = "permuted") -> TaskStream:
    """Stream whose task i > 1 applies the fixed pixel permutation of ``seeds[i - 1]``.

    Task 1 is the unpermuted base dataset. All tasks share the base arrays.

    Raises:
        ConfigurationError: Wrong number of seeds or duplicate seeds
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) != num_tasks:
        raise ConfigurationError(f"expected {num_tasks} permutation seeds, got {len(seeds)}", ["seeds"])
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("permutation seeds must be distinct", ["seeds"])
    width = base.input_dim
    tasks = []
    for task_id in range(1, num_tasks + 1):
        permutation = None if task_id == 1 else make_permutation(seeds[task_id - 1], width)
        tasks.append(Task(
            task_id=task_id,
            train=base.train.permuted(permutation),
            test=base.test.permuted(permutation),
            class_ids=base.class_ids,
            image_shape=base.image_shape,
        ))
    num_outputs = max(base.class_ids) + 1
    logger.info(f"Built permuted stream with {num_tasks} tasks of {len(base.train)} training rows")
    return TaskStream(tasks, num_outputs=num_outputs, domain_mode=True, name=name)


def build_split_stream(
    dataset: Task, classes_per_task: int, domain_mode: bool = False, name: str = "split"
) -> TaskStream:
    """Partition the classes of ``dataset`` into consecutive groups in label order.

    Raises:
        ConfigurationError: Class count not divisible by ``classes_per_task``
    """
    classes = sorted(set(dataset.class_ids))
    if classes_per_task < 1 or len(classes) % classes_per_task:
        raise ConfigurationError(
            f"{len(classes)} classes cannot be split into groups of {classes_per_task}", ["classes_per_task"]
        )
    tasks = []
    for position in range(len(classes) // classes_per_task):
        owned = classes[position * classes_per_task:(position + 1) * classes_per_task]
        train_rows = np.flatnonzero(np.isin(dataset.train.labels, owned))
        test_rows = np.flatnonzero(np.isin(dataset.test.labels, owned))
        tasks.append(Task(
            task_id=position + 1,
            train=dataset.train.subset(train_rows),
            test=dataset.test.subset(test_rows),
            class_ids=tuple(owned),
            image_shape=dataset.image_shape,
        ))
    return TaskStream(tasks, num_outputs=max(classes) + 1, domain_mode=domain_mode, name=name)


@dataclass
class SyntheticStreamSpec:
    """Per-class Gaussian clusters, one set of clusters per task.

    ``class_frequencies`` is either one vector shared by all tasks or one
    vector per task. ``cluster_std`` is a scalar or one value per class.
    ``task_variation`` selects how tasks differ: ``resample`` draws new
    class means for every task, ``permute`` permutes the features of the
    first task, ``shared`` reuses the same clusters.
    """

    num_tasks: int = 3
    num_classes: int = 2
    dim: int = 20
    train_per_task: int = 200
    test_fraction: float = 0.2
    means: Optional[List[List[float]]] = None
    mean_scale: float = 3.0
    cluster_std: Union[float, List[float]] = 1.0
    class_frequencies: Optional[List[Any]] = None
    task_variation: str = "resample"
    image_shape: Optional[Tuple[int, int]] = None
    seed: int = 0
    domain_mode: bool = True

    def validate(self) -> None:
        bad = []
        if self.num_tasks < 1:
            bad.append("num_tasks")
        if self.num_classes < 1:
            bad.append("num_classes")
        if self.dim < 1:
            bad.append("dim")
        if self.train_per_task < 1:
            bad.append("train_per_task")
        if not 0.0 < self.test_fraction < 1.0:
            bad.append("test_fraction")
        if self.means is not None and (
            len(self.means) != self.num_classes or any(len(m) != self.dim for m in self.means)
        ):
            bad.append("means")
        if isinstance(self.cluster_std, (list, tuple)):
            if len(self.cluster_std) != self.num_classes or min(self.cluster_std) <= 0:
                bad.append("cluster_std")
        elif self.cluster_std <= 0:
            bad.append("cluster_std")
        if self.task_variation not in ("resample", "permute", "shared"):
            bad.append("task_variation")
        if self.image_shape is not None and self.image_shape[0] * self.image_shape[1] != self.dim:
            bad.append("image_shape")
        if self.class_frequencies is not None:
            try:
                for task_id in range(1, self.num_tasks + 1):
                    self.frequencies_for(task_id)
            except (ConfigurationError, ValueError, TypeError, IndexError):
                bad.append("class_frequencies")
        if bad:
            raise ConfigurationError("invalid synthetic stream specification", bad)

    def frequencies_for(self, task_id: int) -> np.ndarray:
        if self.class_frequencies is None:
            return np.full(self.num_classes, 1.0 / self.num_classes)
        table = self.class_frequencies
        row = table[task_id - 1] if isinstance(table[0], (list, tuple)) else table
        freqs = np.asarray(row, dtype=np.float64)
        if freqs.shape != (self.num_classes,) or np.any(freqs < 0) or freqs.sum() <= 0:
            raise ConfigurationError("class frequencies must be non-negative with one entry per class",
                                     ["class_frequencies"])
        return freqs / freqs.sum()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_tasks": self.num_tasks,
            "num_classes": self.num_classes,
            "dim": self.dim,
            "train_per_task": self.train_per_task,
            "test_fraction": self.test_fraction,
            "means": self.means,
            "mean_scale": self.mean_scale,
            "cluster_std": self.cluster_std,
            "class_frequencies": self.class_frequencies,
            "task_variation": self.task_variation,
            "image_shape": list(self.image_shape) if self.image_shape else None,
            "seed": self.seed,
            "domain_mode": self.domain_mode,
        }


def _class_counts(total: int, freqs: np.ndarray) -> np.ndarray:
    """Largest-remainder rounding of ``total * freqs``."""
    raw = total * freqs
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def build_synthetic_stream(spec: SyntheticStreamSpec) -> TaskStream:
    """Seeded stream of Gaussian-cluster tasks sharing the label set 0..C-1.

    Each task draws ``train_per_task / (1 - test_fraction)`` rows split by the
    class frequencies, then holds out ``test_fraction`` of them (seeded).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    stds = np.asarray(spec.cluster_std, dtype=np.float64) * np.ones(spec.num_classes)
    total = int(round(spec.train_per_task / (1.0 - spec.test_fraction)))
    base_means = None
    permutation = None
    tasks = []
    next_source = 0
    for task_id in range(1, spec.num_tasks + 1):
        if spec.means is not None:
            means = np.asarray(spec.means, dtype=np.float64)
        elif base_means is None or spec.task_variation == "resample":
            means = rng.normal(0.0, spec.mean_scale, size=(spec.num_classes, spec.dim))
        else:
            means = base_means
        if base_means is None:
            base_means = means
        if spec.task_variation == "permute" and task_id > 1:
            permutation = rng.permutation(spec.dim)
        counts = _class_counts(total, spec.frequencies_for(task_id))
        labels = np.repeat(np.arange(spec.num_classes), counts)
        features = means[labels] + rng.normal(size=(labels.size, spec.dim)) * stds[labels][:, None]
        if permutation is not None:
            features = features[:, permutation]
        order = rng.permutation(labels.size)
        features, labels = features[order], labels[order]
        source = np.arange(labels.size) + next_source
        next_source += labels.size
        held_out = int(round(spec.test_fraction * labels.size))
        test_rows = np.sort(rng.choice(labels.size, size=held_out, replace=False))
        train_rows = np.setdiff1d(np.arange(labels.size), test_rows)
        tasks.append(Task(
            task_id=task_id,
            train=TaskSplit(features[train_rows], labels[train_rows], source[train_rows]),
            test=TaskSplit(features[test_rows], labels[test_rows], source[test_rows]),
            class_ids=tuple(range(spec.num_classes)),
            image_shape=spec.image_shape,
        ))
    logger.info(f"Built synthetic stream: {spec.num_tasks} tasks, {spec.num_classes} classes, dim {spec.dim}")
    return TaskStream(tasks, num_outputs=spec.num_classes, domain_mode=spec.domain_mode, name="synthetic")
