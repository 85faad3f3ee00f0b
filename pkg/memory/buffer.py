"""Fixed-capacity replay memory split into per-task slots.

Every committed slot holds a reservoir part and a class-balanced ring part.
While a task trains, its examples accumulate in a staging slot that is
committed at the task boundary by ``rebuild_for_new_task``; prior slots are
only resized at that point.
"""

import json
import logging
from collections import Counter, OrderedDict, deque
from typing import Any, Deque, Dict, Iterable, List, Mapping, Optional, Set, Tuple

import numpy as np

from nn_core import Batch
from task_streams import Example, Task
from utils.errors import ContractViolation

logger = logging.getLogger(__name__)

Key = Tuple[int, int]


def slot_budgets(capacity: int, task_ids: Iterable[int]) -> Dict[int, int]:
    """Equal allocation of ``capacity`` over ``task_ids``.

    Every task gets ``capacity // i``; the remainder adds one slot to the
    lowest task ids.
    """
    ids = sorted(task_ids)
    if not ids:
        return {}
    base, remainder = divmod(int(capacity), len(ids))
    return {task_id: base + (1 if position < remainder else 0) for position, task_id in enumerate(ids)}


def balanced_quotas(budget: int, supply: Mapping[int, int]) -> Dict[int, int]:
    """Split ``budget`` over classes as evenly as their supply allows.

    Classes short of examples keep all of them; the rest share what is left
    so their quotas differ by at most one, extra units going to the lowest
    class ids.
    """
    classes = sorted(supply)
    quotas = {c: 0 for c in classes}
    total = sum(max(0, int(supply[c])) for c in classes)
    budget = min(max(0, int(budget)), total)
    if budget == 0:
        return quotas
    lo, hi = 0, max(int(supply[c]) for c in classes)
    while lo < hi:
        level = (lo + hi + 1) // 2
        if sum(min(int(supply[c]), level) for c in classes) <= budget:
            lo = level
        else:
            hi = level - 1
    for c in classes:
        quotas[c] = min(int(supply[c]), lo)
    remainder = budget - sum(quotas.values())
    for c in classes:
        if remainder == 0:
            break
        if supply[c] > lo:
            quotas[c] += 1
            remainder -= 1
    return quotas


class TaskSlot:
    """Committed memory of one task: a reservoir part and a per-class FIFO ring part."""

    def __init__(
        self,
        task_id: int,
        budget: int,
        ring_budget: int,
        res_part: Optional[List[Example]] = None,
        ring_part: Optional[Dict[int, Deque[Example]]] = None,
        class_supply: Optional[Dict[int, int]] = None,
    ):
        self.task_id = task_id
        self.budget = budget
        self.ring_budget = ring_budget
        self.res_part: List[Example] = list(res_part or [])
        self.ring_part: Dict[int, Deque[Example]] = {c: deque(d) for c, d in (ring_part or {}).items()}
        self.class_supply: Dict[int, int] = dict(class_supply or {})

    @property
    def res_budget(self) -> int:
        return self.budget - self.ring_budget

    def ring_examples(self) -> List[Example]:
        return [e for c in sorted(self.ring_part) for e in self.ring_part[c]]

    def examples(self) -> List[Example]:
        return self.res_part + self.ring_examples()

    def ring_counts(self) -> Dict[int, int]:
        return {c: len(d) for c, d in self.ring_part.items()}

    def keys(self) -> Set[Key]:
        return {e.key for e in self.examples()}

    def __len__(self) -> int:
        return len(self.res_part) + sum(len(d) for d in self.ring_part.values())

    def copy(self) -> "TaskSlot":
        return TaskSlot(self.task_id, self.budget, self.ring_budget, self.res_part, self.ring_part, self.class_supply)

    def to_dict(self) -> Dict[str, Any]:
        entries = [
            {"task_id": e.task_id, "part": "res", "class_id": e.label, "source_index": e.source_index}
            for e in self.res_part
        ]
        entries += [
            {"task_id": e.task_id, "part": "ring", "class_id": e.label, "source_index": e.source_index}
            for e in self.ring_examples()
        ]
        return {
            "task_id": self.task_id,
            "budget": self.budget,
            "ring_budget": self.ring_budget,
            "class_supply": {str(c): n for c, n in sorted(self.class_supply.items())},
            "examples": entries,
        }


class StagingSlot:
    """Accumulates the examples of the task currently being trained.

    It keeps a reservoir pool (at most ``budget`` examples) and, per class,
    a FIFO of the most recent examples whose capacities are the balanced
    split of ``budget`` over the class supply of the task. Committing picks
    the ring part from the FIFOs and the reservoir part from the pool.
    """

    def __init__(self, task: Task, budget: int):
        self.task = task
        self.task_id = task.task_id
        self.budget = int(budget)
        self.class_supply = task.class_counts()
        for c in task.class_ids:
            self.class_supply.setdefault(c, 0)
        self.ring_capacity = balanced_quotas(self.budget, self.class_supply)
        self.reservoir: List[Example] = []
        self.reservoir_keys: Set[int] = set()
        self.reservoir_labels: Counter = Counter()
        self.seen = 0.0
        self.ring: Dict[int, "OrderedDict[int, Example]"] = {c: OrderedDict() for c in self.class_supply}
        self.curriculum: Any = None

    def copy(self) -> "StagingSlot":
        other = StagingSlot.__new__(StagingSlot)
        other.task = self.task
        other.task_id = self.task_id
        other.budget = self.budget
        other.class_supply = dict(self.class_supply)
        other.ring_capacity = dict(self.ring_capacity)
        other.reservoir = list(self.reservoir)
        other.reservoir_keys = set(self.reservoir_keys)
        other.reservoir_labels = Counter(self.reservoir_labels)
        other.seen = self.seen
        other.ring = {c: OrderedDict(d) for c, d in self.ring.items()}
        other.curriculum = None if self.curriculum is None else self.curriculum.copy()
        return other

    def ring_counts(self) -> Dict[int, int]:
        return {c: len(d) for c, d in self.ring.items()}

    def example_at(self, row: int) -> Example:
        """Build the memory entry for training row ``row`` of the staged task."""
        train = self.task.train
        return Example(
            train.rows(np.array([row]))[0].copy(),
            int(train.labels[row]),
            self.task_id,
            int(train.source_index[row]),
            self.task.image_shape,
        )


class MemoryBuffer:
    """Replay memory of fixed capacity.

    Args:
        capacity: Number of examples the memory may hold after a task boundary
        rng: Generator used by the buffer policies (reservoir draws, evictions)
    """

    def __init__(self, capacity: int, rng: Optional[np.random.Generator] = None):
        if int(capacity) < 1:
            raise ContractViolation("memory capacity must be at least 1")
        self.capacity = int(capacity)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.slots: Dict[int, TaskSlot] = {}
        self.staging: Optional[StagingSlot] = None
        self.hybrid_switched = False
        self.watch_singletons = False
        self._observed = 0.0
        self._cache: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = None

    @property
    def task_count(self) -> int:
        return len(self.slots) + (1 if self.staging is not None else 0)

    @property
    def seen_counter(self) -> int:
        """Number of stream items observed by reservoir updates so far."""
        staged = self.staging.seen if self.staging is not None else 0.0
        return int(self._observed + staged)

    def __len__(self) -> int:
        return sum(len(slot) for slot in self.slots.values())

    def open_staging(self, task: Task) -> StagingSlot:
        """Start accumulating ``task`` with budget ``capacity // i`` for the i-th task."""
        if self.staging is not None:
            raise ContractViolation(f"task {self.staging.task_id} is still staged")
        if task.task_id in self.slots:
            raise ContractViolation(f"task {task.task_id} already has a memory slot")
        budget = self.capacity // (len(self.slots) + 1)
        self.staging = StagingSlot(task, budget)
        logger.debug(f"Opened staging slot for task {task.task_id} with budget {budget}")
        return self.staging

    def close_staging(self) -> None:
        if self.staging is not None:
            self._observed += self.staging.seen
        self.staging = None

    def invalidate(self) -> None:
        self._cache = None

    def committed_examples(self) -> List[Example]:
        return [e for task_id in sorted(self.slots) for e in self.slots[task_id].examples()]

    def committed_arrays(self) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
        """Stacked (inputs, labels, task_ids, source_index) of all committed examples."""
        if self._cache is None:
            examples = self.committed_examples()
            if not examples:
                return None
            self._cache = (
                np.stack([e.features for e in examples]),
                np.array([e.label for e in examples], dtype=np.int64),
                np.array([e.task_id for e in examples], dtype=np.int64),
                np.array([e.source_index for e in examples], dtype=np.int64),
            )
        return self._cache

    def class_counts(self, include_staging: bool = True) -> Counter:
        counts: Counter = Counter()
        for slot in self.slots.values():
            for e in slot.examples():
                counts[(e.task_id, e.label)] += 1
        if include_staging and self.staging is not None:
            for label, count in self.staging.reservoir_labels.items():
                counts[(self.staging.task_id, label)] += count
        return counts

    def slot_keys(self) -> Dict[int, Set[Key]]:
        return {task_id: slot.keys() for task_id, slot in self.slots.items()}

    def snapshot(self, rng: Optional[np.random.Generator] = None) -> "MemoryBuffer":
        """Independent copy; examples are shared since they are never mutated.

        Args:
            rng: Generator for the copy; defaults to a copy of this buffer's generator
        """
        other = MemoryBuffer(self.capacity, rng if rng is not None else _copy_rng(self.rng))
        other.slots = {task_id: slot.copy() for task_id, slot in self.slots.items()}
        other.staging = None if self.staging is None else self.staging.copy()
        other.hybrid_switched = self.hybrid_switched
        other.watch_singletons = self.watch_singletons
        other._observed = self._observed
        other._cache = self._cache
        return other

    def to_json(self) -> str:
        data = {
            "capacity": self.capacity,
            "hybrid_switched": self.hybrid_switched,
            "seen_counter": self.seen_counter,
            "slots": [self.slots[task_id].to_dict() for task_id in sorted(self.slots)],
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, tasks: Mapping[int, Task], rng: Optional[np.random.Generator] = None) -> "MemoryBuffer":
        """Rebuild committed slots from ``to_json`` output, looking features up in ``tasks``."""
        data = json.loads(text)
        buffer = cls(data["capacity"], rng)
        buffer.hybrid_switched = data["hybrid_switched"]
        buffer._observed = float(data["seen_counter"])
        lookups: Dict[int, Dict[int, int]] = {}
        for slot_data in data["slots"]:
            task_id = slot_data["task_id"]
            if task_id not in tasks:
                raise ContractViolation(f"snapshot references unknown task {task_id}")
            task = tasks[task_id]
            rows = lookups.setdefault(
                task_id, {int(s): r for r, s in enumerate(task.train.source_index)}
            )
            slot = TaskSlot(
                task_id,
                slot_data["budget"],
                slot_data["ring_budget"],
                class_supply={int(c): n for c, n in slot_data["class_supply"].items()},
            )
            for entry in slot_data["examples"]:
                row = rows[entry["source_index"]]
                example = Example(
                    task.train.rows(np.array([row]))[0].copy(),
                    int(task.train.labels[row]),
                    task_id,
                    entry["source_index"],
                    task.image_shape,
                )
                if entry["part"] == "res":
                    slot.res_part.append(example)
                else:
                    slot.ring_part.setdefault(example.label, deque()).append(example)
            buffer.slots[task_id] = slot
        return buffer


def _copy_rng(rng: np.random.Generator) -> np.random.Generator:
    bit_generator = type(rng.bit_generator)()
    bit_generator.state = rng.bit_generator.state
    return np.random.Generator(bit_generator)


def _shrink_slot(slot: TaskSlot, budget: int, ring_size: int, rng: np.random.Generator) -> None:
    ring_budget = min(int(ring_size), budget)
    res_budget = budget - ring_budget
    if len(slot.res_part) > res_budget:
        if res_budget == 0:
            slot.res_part = []
        else:
            keep = np.sort(rng.choice(len(slot.res_part), size=res_budget, replace=False))
            slot.res_part = [slot.res_part[k] for k in keep]
    counts = slot.ring_counts()
    if sum(counts.values()) > ring_budget:
        quotas = balanced_quotas(ring_budget, counts)
        for c, fifo in slot.ring_part.items():
            while len(fifo) > quotas[c]:
                fifo.popleft()
    slot.budget = budget
    slot.ring_budget = ring_budget


def commit_staging(buffer: MemoryBuffer, ring_size: int, budget: Optional[int] = None) -> TaskSlot:
    """Turn the staging slot into a committed slot with ring part of size ``ring_size``.

    The ring part takes the newest examples of each class, balanced over
    classes; the reservoir part takes up to ``budget - ring_size`` pool
    members not already in the ring part.

    Raises:
        ContractViolation: No staged task or ``ring_size`` outside [0, budget]
    """
    staging = buffer.staging
    if staging is None:
        raise ContractViolation("no staged task to commit")
    budget = staging.budget if budget is None else int(budget)
    if not 0 <= ring_size <= budget:
        raise ContractViolation(f"ring size {ring_size} outside [0, {budget}] for task {staging.task_id}")
    supply = staging.ring_counts()
    quotas = balanced_quotas(ring_size, supply)
    ring_part: Dict[int, Deque[Example]] = {}
    ring_keys: Set[int] = set()
    for c, fifo in staging.ring.items():
        newest = list(fifo.values())[len(fifo) - quotas[c]:] if quotas[c] else []
        ring_part[c] = deque(newest)
        ring_keys.update(e.source_index for e in newest)
    pool = [e for e in staging.reservoir if e.source_index not in ring_keys]
    need = budget - ring_size
    if need == 0:
        res_part: List[Example] = []
    elif len(pool) > need:
        keep = np.sort(buffer.rng.choice(len(pool), size=need, replace=False))
        res_part = [pool[k] for k in keep]
    else:
        res_part = pool
    slot = TaskSlot(staging.task_id, budget, ring_size, res_part, ring_part, supply)
    buffer.slots[staging.task_id] = slot
    buffer.close_staging()
    buffer.invalidate()
    logger.debug(
        f"Committed task {slot.task_id}: budget {budget}, ring {sum(quotas.values())}, res {len(res_part)}"
    )
    return slot


def rebuild_for_new_task(buffer: MemoryBuffer, task_count: int, plan: Any) -> MemoryBuffer:
    """Resize every slot to the equal allocation for ``task_count`` tasks.

    Prior slots shrink their reservoir part first (seeded-uniform eviction),
    then their ring part (oldest first, class-balanced). A staged task is
    committed with its own ring size from the plan.

    Args:
        buffer: Memory to rebuild in place
        task_count: Number of tasks trained so far, including the staged one
        plan: ``SwitchingPlan`` or mapping from task id to ring size a_j

    Raises:
        ContractViolation: Task count mismatch or a task missing from the plan
    """
    points: Mapping[int, int] = getattr(plan, "points", plan)
    task_ids = sorted(buffer.slots) + ([buffer.staging.task_id] if buffer.staging is not None else [])
    if len(task_ids) != task_count:
        raise ContractViolation(f"buffer holds {len(task_ids)} tasks but the rebuild is for {task_count}")
    missing = [j for j in task_ids if j not in points]
    if missing:
        raise ContractViolation(f"switching plan has no ring size for tasks {missing}")
    before = buffer.class_counts() if buffer.watch_singletons else None
    budgets = slot_budgets(buffer.capacity, task_ids)
    for task_id in sorted(buffer.slots):
        _shrink_slot(buffer.slots[task_id], budgets[task_id], points[task_id], buffer.rng)
    if buffer.staging is not None:
        commit_staging(buffer, int(points[buffer.staging.task_id]), budgets[buffer.staging.task_id])
    buffer.invalidate()
    if before is not None and not buffer.hybrid_switched:
        after = buffer.class_counts(include_staging=False)
        if any(after.get(key, 0) == 1 and count >= 2 for key, count in before.items()):
            buffer.hybrid_switched = True
            logger.info(f"Hybrid memory switched to ring mode at task boundary {task_count}")
    return buffer


def sample_memory_batch(buffer: MemoryBuffer, batch_size: int, rng: np.random.Generator) -> Optional[Batch]:
    """Uniform sample with replacement over the committed examples.

    Returns:
        Batch, or None when the memory is empty (no replay)
    """
    arrays = buffer.committed_arrays()
    if arrays is None:
        return None
    inputs, labels, task_ids, source_index = arrays
    idx = rng.integers(0, labels.shape[0], size=batch_size)
    return Batch(inputs=inputs[idx], labels=labels[idx], task_ids=task_ids[idx], source_index=source_index[idx])


def check_invariants(
    buffer: MemoryBuffer,
    previous: Optional[Mapping[int, Set[Key]]] = None,
    trained_tasks: Optional[int] = None,
) -> List[str]:
    """Check the memory constraints at a task boundary.

    Args:
        buffer: Memory right after ``rebuild_for_new_task``
        previous: ``slot_keys()`` taken at the previous boundary
        trained_tasks: Number of tasks trained so far

    Returns:
        List of violation messages, empty when every constraint holds
    """
    violations = []
    union: Set[Key] = set()
    for task_id, slot in sorted(buffer.slots.items()):
        res_keys = [e.key for e in slot.res_part]
        ring_keys = [e.key for e in slot.ring_examples()]
        if len(set(res_keys)) != len(res_keys) or len(set(ring_keys)) != len(ring_keys):
            violations.append(f"slot {task_id} stores an example twice")
        if set(res_keys) & set(ring_keys):
            violations.append(f"slot {task_id}: reservoir and ring parts overlap")
        keys = set(res_keys) | set(ring_keys)
        if keys & union:
            violations.append(f"slot {task_id} shares examples with another slot")
        union |= keys
        if any(key[0] != task_id for key in keys):
            violations.append(f"slot {task_id} holds examples of another task")
        if len(slot.res_part) > slot.res_budget:
            violations.append(f"slot {task_id}: reservoir part exceeds its budget")
        ring_counts = slot.ring_counts()
        if sum(ring_counts.values()) > slot.ring_budget:
            violations.append(f"slot {task_id}: ring part exceeds its budget")
        supply = {c: slot.class_supply.get(c, 0) for c in ring_counts}
        balanced = balanced_quotas(sum(ring_counts.values()), supply)
        if any(balanced[c] != n for c, n in ring_counts.items()):
            violations.append(f"slot {task_id}: ring part is not class-balanced {ring_counts}")
        if previous is not None and task_id in previous and not keys <= previous[task_id]:
            violations.append(f"slot {task_id} gained examples after its task ended")
    if trained_tasks is not None and any(task_id > trained_tasks for task_id in buffer.slots):
        violations.append("memory holds a slot for a task not yet trained")
    if len(buffer) > buffer.capacity:
        violations.append(f"memory holds {len(buffer)} examples for capacity {buffer.capacity}")
    budgets = slot_budgets(buffer.capacity, buffer.slots)
    if any(buffer.slots[j].budget != b for j, b in budgets.items()):
        violations.append("slot budgets do not follow the equal allocation")
    if buffer.slots and sum(budgets.values()) != buffer.capacity:
        violations.append("slot budgets do not add up to the capacity")
    return violations
