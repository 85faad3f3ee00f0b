"""Streaming update rules applied to the staging slot, one batch at a time."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Set

import numpy as np

from nn_core import Batch
from task_streams import Example
from utils.errors import ConfigurationError, ContractViolation
from .buffer import MemoryBuffer, StagingSlot

logger = logging.getLogger(__name__)


def _staging_for(buffer: MemoryBuffer, task_id: int, batch: Batch) -> StagingSlot:
    staging = buffer.staging
    if staging is None or staging.task_id != task_id:
        raise ContractViolation(f"task {task_id} is not the staged task")
    if batch.source_index is None:
        raise ContractViolation("memory updates need the source index of every row")
    if np.any(batch.task_ids != task_id):
        raise ContractViolation(f"batch contains rows of tasks other than {task_id}")
    return staging


def _example(batch: Batch, row: int, staging: StagingSlot) -> Example:
    return Example(
        batch.inputs[row].copy(),
        int(batch.labels[row]),
        staging.task_id,
        int(batch.source_index[row]),
        staging.task.image_shape,
    )


def _note_eviction(buffer: MemoryBuffer, staging: StagingSlot, label: int) -> None:
    if buffer.watch_singletons and not buffer.hybrid_switched:
        if staging.reservoir_labels[label] == 1:
            buffer.hybrid_switched = True
            logger.info(f"Hybrid memory switched to ring mode: class {label} of task {staging.task_id} down to one example")


def _reservoir_insert(buffer: MemoryBuffer, staging: StagingSlot, batch: Batch, rows: np.ndarray, slots: np.ndarray) -> None:
    """Append while under budget, then replace position ``slot`` whenever it falls inside the budget.

    A row whose example is already resident leaves the pool unchanged.
    """
    budget = staging.budget
    position = 0
    count = len(rows)
    while position < count and len(staging.reservoir) < budget:
        row = int(rows[position])
        position += 1
        source = int(batch.source_index[row])
        if source in staging.reservoir_keys:
            continue
        example = _example(batch, row, staging)
        staging.reservoir.append(example)
        staging.reservoir_keys.add(source)
        staging.reservoir_labels[example.label] += 1
    if position >= count or budget == 0:
        return
    for hit in position + np.flatnonzero(slots[position:] < budget):
        row = int(rows[hit])
        source = int(batch.source_index[row])
        if source in staging.reservoir_keys:
            continue
        slot = int(slots[hit])
        evicted = staging.reservoir[slot]
        example = _example(batch, row, staging)
        staging.reservoir[slot] = example
        staging.reservoir_keys.discard(evicted.source_index)
        staging.reservoir_keys.add(source)
        staging.reservoir_labels[evicted.label] -= 1
        staging.reservoir_labels[example.label] += 1
        if evicted.label != example.label:
            _note_eviction(buffer, staging, evicted.label)


def reservoir_update(buffer: MemoryBuffer, batch: Batch, task_id: int) -> MemoryBuffer:
    """Reservoir sampling of the staged task.

    Item j of the batch (0-based) after n observed items replaces position
    ``randint(0, n + j)`` if that position lies inside the budget.
    """
    staging = _staging_for(buffer, task_id, batch)
    count = len(batch)
    spans = staging.seen + np.arange(1, count + 1, dtype=np.float64)
    slots = np.floor(buffer.rng.random(count) * spans).astype(np.int64)
    _reservoir_insert(buffer, staging, batch, np.arange(count), slots)
    staging.seen += count
    return buffer


def _ring_push(staging: StagingSlot, batch: Batch, rows: np.ndarray) -> None:
    for row in rows:
        label = int(batch.labels[row])
        fifo = staging.ring.get(label)
        if fifo is None:
            raise ContractViolation(f"class {label} is not declared for task {staging.task_id}")
        source = int(batch.source_index[row])
        if source in fifo:
            fifo.move_to_end(source)
            continue
        fifo[source] = _example(batch, int(row), staging)
        if len(fifo) > staging.ring_capacity[label]:
            fifo.popitem(last=False)


def ring_full_update(buffer: MemoryBuffer, batch: Batch, task_id: int) -> MemoryBuffer:
    """Push every row onto the FIFO of its class, evicting the oldest on overflow.

    Raises:
        ContractViolation: A row's class is not declared for the task
    """
    staging = _staging_for(buffer, task_id, batch)
    _ring_push(staging, batch, np.arange(len(batch)))
    return buffer


def hybrid_update(buffer: MemoryBuffer, batch: Batch, task_id: int) -> MemoryBuffer:
    """Reservoir behaviour until some stored class is down to one example, ring-full afterwards.

    The class FIFOs are fed in both modes so a switch in the middle of a
    task can still commit a full ring part.
    """
    buffer.watch_singletons = True
    if not buffer.hybrid_switched:
        reservoir_update(buffer, batch, task_id)
    return ring_full_update(buffer, batch, task_id)


def implicit_curriculum_rank(learned_epoch: np.ndarray, losses: np.ndarray) -> np.ndarray:
    """Row order by ascending learned epoch, then ascending loss.

    Never-learned rows carry an infinite learned epoch and rank last. The
    sort is stable, so full ties keep their original order.
    """
    return np.lexsort((np.asarray(losses, dtype=np.float64), np.asarray(learned_epoch, dtype=np.float64)))


def _pool_size(gamma: float, count: int) -> int:
    return min(count, int(math.ceil(gamma * count - 1e-9)))


@dataclass
class CurriculumState:
    gamma: float
    total_epochs: int
    learned_epoch: np.ndarray
    losses: np.ndarray
    ranking: Optional[np.ndarray] = None
    easy_pool: Set[int] = field(default_factory=set)
    easy_by_class: Dict[int, Set[int]] = field(default_factory=dict)

    @property
    def warmup_epochs(self) -> int:
        return int(math.ceil(self.total_epochs / 2))

    def copy(self) -> "CurriculumState":
        return CurriculumState(
            self.gamma,
            self.total_epochs,
            self.learned_epoch.copy(),
            self.losses.copy(),
            None if self.ranking is None else self.ranking.copy(),
            set(self.easy_pool),
            {c: set(s) for c, s in self.easy_by_class.items()},
        )


def start_curriculum(buffer: MemoryBuffer, gamma: float, total_epochs: int) -> CurriculumState:
    """Attach curriculum bookkeeping to the staging slot.

    Raises:
        ConfigurationError: gamma outside (0, 1] or an easy pool smaller than the slot budget
    """
    staging = buffer.staging
    if staging is None:
        raise ContractViolation("no staged task for the curriculum")
    if not 0.0 < gamma <= 1.0:
        raise ConfigurationError("curriculum gamma must lie in (0, 1]", ["gamma"])
    count = len(staging.task.train)
    if _pool_size(gamma, count) < min(staging.budget, count):
        raise ConfigurationError(
            f"easy pool of {_pool_size(gamma, count)} examples is smaller than the slot budget {staging.budget}",
            ["gamma"],
        )
    state = CurriculumState(gamma, int(total_epochs), np.full(count, np.inf), np.zeros(count))
    staging.curriculum = state
    return state


def refresh_easy_pool(buffer: MemoryBuffer, epoch: int, correct: np.ndarray, losses: np.ndarray) -> CurriculumState:
    """Record the epoch's correctness and losses and recompute the easy pools."""
    staging = buffer.staging
    state = staging.curriculum
    correct = np.asarray(correct, dtype=bool)
    state.learned_epoch = np.where(correct, np.minimum(state.learned_epoch, epoch), np.inf)
    state.losses = np.asarray(losses, dtype=np.float64)
    state.ranking = implicit_curriculum_rank(state.learned_epoch, state.losses)
    train = staging.task.train
    ranked_sources = train.source_index[state.ranking]
    ranked_labels = train.labels[state.ranking]
    state.easy_pool = set(int(s) for s in ranked_sources[:_pool_size(state.gamma, len(train))])
    state.easy_by_class = {}
    for c in staging.ring:
        members = ranked_sources[ranked_labels == c]
        state.easy_by_class[c] = set(int(s) for s in members[:_pool_size(state.gamma, len(members))])
    return state


def cur_res_update(
    buffer: MemoryBuffer, epoch: int, total_epochs: int, easy_pool: Set[int], batch: Batch, gamma: float
) -> MemoryBuffer:
    """Curriculum reservoir update.

    The first ``ceil(k / 2)`` epochs are plain reservoir sampling. Later
    epochs only admit easy-pool rows; the counter grows by ``1 / gamma`` per
    admitted row, so each is kept with probability ``budget / (gamma * N)``.
    """
    if epoch <= int(math.ceil(total_epochs / 2)):
        return reservoir_update(buffer, batch, batch_task_id(batch))
    staging = _staging_for(buffer, batch_task_id(batch), batch)
    count = len(batch)
    draws = buffer.rng.random(count)
    easy = np.fromiter((int(s) in easy_pool for s in batch.source_index), dtype=bool, count=count)
    spans = gamma * staging.seen + np.cumsum(easy)
    slots = np.floor(draws * spans).astype(np.int64)
    rows = np.flatnonzero(easy)
    _reservoir_insert(buffer, staging, batch, rows, slots[rows])
    staging.seen += float(easy.sum()) / gamma
    return buffer


def cur_ring_full_update(
    buffer: MemoryBuffer, epoch: int, total_epochs: int, easy_by_class: Dict[int, Set[int]], batch: Batch
) -> MemoryBuffer:
    """Curriculum ring update: plain ring-full first, then only easy rows of each class."""
    if epoch <= int(math.ceil(total_epochs / 2)):
        return ring_full_update(buffer, batch, batch_task_id(batch))
    staging = _staging_for(buffer, batch_task_id(batch), batch)
    rows = [
        r for r in range(len(batch))
        if int(batch.source_index[r]) in easy_by_class.get(int(batch.labels[r]), ())
    ]
    _ring_push(staging, batch, np.asarray(rows, dtype=np.int64))
    return buffer


def batch_task_id(batch: Batch) -> int:
    return int(batch.task_ids[0])


def finalize_curriculum_reservoir(buffer: MemoryBuffer) -> None:
    """Replace pool members outside the easy pool with unused easy examples, easiest first."""
    staging = buffer.staging
    state = staging.curriculum
    if state is None or state.ranking is None:
        return
    train = staging.task.train
    candidates = (
        int(row) for row in state.ranking
        if int(train.source_index[row]) in state.easy_pool
        and int(train.source_index[row]) not in staging.reservoir_keys
    )
    for position, member in enumerate(list(staging.reservoir)):
        if member.source_index in state.easy_pool:
            continue
        row = next(candidates, None)
        if row is None:
            break
        replacement = staging.example_at(row)
        staging.reservoir[position] = replacement
        staging.reservoir_keys.discard(member.source_index)
        staging.reservoir_keys.add(replacement.source_index)
        staging.reservoir_labels[member.label] -= 1
        staging.reservoir_labels[replacement.label] += 1


def finalize_curriculum_ring(buffer: MemoryBuffer) -> None:
    """Drop ring members outside their class's easy pool and refill from it, easiest first."""
    staging = buffer.staging
    state = staging.curriculum
    if state is None or state.ranking is None:
        return
    train = staging.task.train
    for c, fifo in staging.ring.items():
        easy = state.easy_by_class.get(c, set())
        target = len(fifo)
        for source in [s for s in fifo if s not in easy]:
            del fifo[source]
        for row in state.ranking:
            if len(fifo) >= target:
                break
            source = int(train.source_index[row])
            if int(train.labels[row]) == c and source in easy and source not in fifo:
                fifo[source] = staging.example_at(int(row))


def random_selection_fill(buffer: MemoryBuffer) -> None:
    """Fill the staging pool with a uniform random selection of the staged task."""
    staging = buffer.staging
    if staging is None:
        raise ContractViolation("no staged task to fill")
    count = len(staging.task.train)
    take = min(staging.budget, count)
    rows = np.sort(buffer.rng.choice(count, size=take, replace=False)) if take else np.zeros(0, dtype=np.int64)
    staging.reservoir = [staging.example_at(int(r)) for r in rows]
    staging.reservoir_keys = {e.source_index for e in staging.reservoir}
    staging.reservoir_labels.clear()
    for e in staging.reservoir:
        staging.reservoir_labels[e.label] += 1
