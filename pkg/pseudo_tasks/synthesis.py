import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from memory import balanced_quotas
from task_streams import Task, TaskSplit
from utils.errors import ConfigurationError, UnsupportedTransformError
from .transforms import blur_images, rotate_images

logger = logging.getLogger(__name__)

METHODS = ("permutation", "rotation", "blurring")


@dataclass
class SynthesisSpec:
    """How pseudo-future tasks are generated from the current task.

    Pseudo-task k (1-based) uses a fresh pixel permutation, a rotation of
    ``k * rotation_step_degrees`` or a blur with sigma
    ``k * blur_sigma_step`` on a ``blur_kernel`` square kernel.
    """

    method: str = "permutation"
    count: int = 1
    examples_per_task: int = 1000
    seed: int = 0
    rotation_step_degrees: float = 15.0
    blur_sigma_step: float = 0.5
    blur_kernel: int = 5
    force_identity: bool = False

    def __post_init__(self):
        bad = []
        if self.method not in METHODS:
            bad.append("method")
        if self.count < 1:
            bad.append("count")
        if self.examples_per_task < 1:
            bad.append("examples_per_task")
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            bad.append("blur_kernel")
        if self.blur_sigma_step <= 0:
            bad.append("blur_sigma_step")
        if bad:
            raise ConfigurationError("invalid pseudo-task synthesis settings", bad)


def stratified_rows(labels: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Pick ``count`` rows spread over classes as evenly as their sizes allow."""
    classes, sizes = np.unique(labels, return_counts=True)
    quotas = balanced_quotas(count, {int(c): int(n) for c, n in zip(classes, sizes)})
    picked = []
    for c in classes:
        members = np.flatnonzero(labels == c)
        if quotas[int(c)]:
            picked.append(rng.choice(members, size=quotas[int(c)], replace=False))
    return np.sort(np.concatenate(picked)) if picked else np.zeros(0, dtype=np.int64)


def _transform(images: np.ndarray, spec: SynthesisSpec, k: int) -> np.ndarray:
    if spec.method == "rotation":
        return rotate_images(images, k * spec.rotation_step_degrees)
    return blur_images(images, k * spec.blur_sigma_step, spec.blur_kernel)


def synthesize_sequence(base_task: Task, spec: SynthesisSpec, first_task_id: Optional[int] = None) -> List[Task]:
    """Build ``spec.count`` pseudo-tasks from one class-stratified subsample of ``base_task``.

    Args:
        base_task: Task just trained
        spec: Synthesis settings
        first_task_id: Id of the first pseudo-task; ids continue from there

    Returns:
        List of pseudo Tasks without test rows

    Raises:
        UnsupportedTransformError: Rotation or blurring of features without an image shape
    """
    if spec.method != "permutation" and base_task.image_shape is None:
        raise UnsupportedTransformError(f"{spec.method} needs image-shaped features, task {base_task.task_id} has none")
    rng = np.random.default_rng(spec.seed)
    train = base_task.train
    rows = stratified_rows(train.labels, min(spec.examples_per_task, len(train)), rng)
    features = train.rows(rows)
    labels = train.labels[rows]
    sources = train.source_index[rows]
    width = features.shape[1]
    start = first_task_id if first_task_id is not None else base_task.task_id + 1
    tasks = []
    for k in range(1, spec.count + 1):
        if spec.method == "permutation":
            permutation = np.arange(width) if spec.force_identity else rng.permutation(width)
            transformed = features[:, permutation]
        else:
            h, w = base_task.image_shape
            transformed = _transform(features.reshape(-1, h, w), spec, k).reshape(-1, width)
        tasks.append(Task(
            task_id=start + k - 1,
            train=TaskSplit(transformed, labels, sources),
            test=TaskSplit.empty(width),
            class_ids=base_task.class_ids,
            image_shape=base_task.image_shape,
        ))
    logger.debug(f"Synthesised {spec.count} {spec.method} pseudo-tasks of {len(rows)} rows from task {base_task.task_id}")
    return tasks

