import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from nn_core import Batch
from utils.errors import ContractViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Example:
    """One labelled row with its provenance."""

    features: np.ndarray
    label: int
    task_id: int
    source_index: int
    image_shape: Optional[Tuple[int, int]] = None

    @property
    def key(self) -> Tuple[int, int]:
        return (self.task_id, self.source_index)


class TaskSplit:
    """Rows of one split of a task.

    The feature matrix may be shared between tasks; an optional column
    permutation is applied whenever rows are read, so permuted tasks do
    not copy the base dataset.
    """

    def __init__(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        source_index: np.ndarray,
        permutation: Optional[np.ndarray] = None,
    ):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ContractViolation(f"features must be a matrix, got shape {features.shape}")
        self._features = features
        self.labels = np.asarray(labels, dtype=np.int64)
        self.source_index = np.asarray(source_index, dtype=np.int64)
        if self.labels.shape != (features.shape[0],) or self.source_index.shape != (features.shape[0],):
            raise ContractViolation("labels and source indices must have one entry per row")
        if permutation is not None:
            permutation = np.asarray(permutation, dtype=np.int64)
            if permutation.shape != (features.shape[1],):
                raise ContractViolation("permutation length must equal the feature width")
        self.permutation = permutation

    def __len__(self) -> int:
        return self._features.shape[0]

    @property
    def width(self) -> int:
        return self._features.shape[1]

    @property
    def inputs(self) -> np.ndarray:
        if self.permutation is None:
            return self._features
        return self._features[:, self.permutation]

    def rows(self, idx: np.ndarray) -> np.ndarray:
        block = self._features[idx]
        if self.permutation is None:
            return block
        return block[:, self.permutation]

    def subset(self, idx: np.ndarray) -> "TaskSplit":
        idx = np.asarray(idx, dtype=np.int64)
        return TaskSplit(self._features[idx], self.labels[idx], self.source_index[idx], self.permutation)

    def permuted(self, permutation: Optional[np.ndarray]) -> "TaskSplit":
        """Share the rows of this split under an additional column permutation."""
        if permutation is None:
            return TaskSplit(self._features, self.labels, self.source_index, self.permutation)
        permutation = np.asarray(permutation, dtype=np.int64)
        combined = permutation if self.permutation is None else self.permutation[permutation]
        return TaskSplit(self._features, self.labels, self.source_index, combined)

    @classmethod
    def empty(cls, width: int) -> "TaskSplit":
        return cls(np.zeros((0, width)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))


@dataclass
class Task:
    """A finite labelled dataset standing in for one task distribution."""

    task_id: int
    train: TaskSplit
    test: TaskSplit
    class_ids: Tuple[int, ...]
    image_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        self.class_ids = tuple(sorted(int(c) for c in self.class_ids))
        if self.image_shape is not None:
            self.image_shape = (int(self.image_shape[0]), int(self.image_shape[1]))
            if self.image_shape[0] * self.image_shape[1] != self.train.width:
                raise ContractViolation(f"image shape {self.image_shape} does not match width {self.train.width}")
        overlap = np.intersect1d(self.train.source_index, self.test.source_index)
        if overlap.size:
            raise ContractViolation(f"task {self.task_id}: train and test share {overlap.size} source indices")

    @property
    def input_dim(self) -> int:
        return self.train.width

    def batch(self, idx: np.ndarray, split: str = "train") -> Batch:
        part = self.train if split == "train" else self.test
        idx = np.asarray(idx, dtype=np.int64)
        return Batch(
            inputs=part.rows(idx),
            labels=part.labels[idx],
            task_ids=np.full(len(idx), self.task_id),
            source_index=part.source_index[idx],
        )

    def examples(self, split: str = "train") -> List[Example]:
        part = self.train if split == "train" else self.test
        inputs = part.inputs
        return [
            Example(inputs[r], int(part.labels[r]), self.task_id, int(part.source_index[r]), self.image_shape)
            for r in range(len(part))
        ]

    def class_counts(self, split: str = "train") -> Dict[int, int]:
        part = self.train if split == "train" else self.test
        values, counts = np.unique(part.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


@dataclass
class TaskStream:
    """An ordered sequence of tasks with ids 1..T.

    With ``domain_mode`` false every row may only predict the classes of
    its own task (per-task heads on a shared output layer).
    """

    tasks: List[Task]
    num_outputs: int
    domain_mode: bool = True
    name: str = "stream"

    def __post_init__(self):
        if not self.tasks:
            raise ContractViolation("a task stream needs at least one task")
        for position, task in enumerate(self.tasks, start=1):
            if task.task_id != position:
                raise ContractViolation(f"task at position {position} has id {task.task_id}")
            if task.class_ids and max(task.class_ids) >= self.num_outputs:
                raise ContractViolation(f"task {position} uses classes beyond {self.num_outputs} outputs")

    @property
    def T(self) -> int:
        return len(self.tasks)

    @property
    def input_dim(self) -> int:
        return self.tasks[0].input_dim

    def task(self, task_id: int) -> Task:
        return self.tasks[task_id - 1]

    def class_table(self) -> Optional[Dict[int, Tuple[int, ...]]]:
        """Admissible classes per task id, or None with a shared head."""
        if self.domain_mode:
            return None
        return {task.task_id: task.class_ids for task in self.tasks}


def build_logit_mask(
    task_ids: Sequence[int], class_table: Optional[Dict[int, Tuple[int, ...]]], num_outputs: int
) -> Optional[np.ndarray]:
    """Boolean mask restricting each row to the classes of its task."""
    if class_table is None:
        return None
    task_ids = np.asarray(task_ids, dtype=np.int64)
    mask = np.zeros((task_ids.shape[0], num_outputs), dtype=bool)
    for task_id in np.unique(task_ids):
        if int(task_id) not in class_table:
            raise ContractViolation(f"no class table entry for task {int(task_id)}")
        rows = task_ids == task_id
        mask[np.ix_(rows, list(class_table[int(task_id)]))] = True
    return mask
