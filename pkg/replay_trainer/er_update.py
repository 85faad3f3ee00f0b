import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from memory import MemoryBuffer, sample_memory_batch
from nn_core import Batch, ModelParams, iterate_minibatches, per_example_stats, sgd_step
from task_streams import Task, build_logit_mask
from utils.errors import ContractViolation
from .base_update import BaseLocalUpdate, LocalUpdateSpec, TrainingRngs

logger = logging.getLogger(__name__)


class ExperienceReplay(BaseLocalUpdate):
    """Joint SGD on a task batch and a memory batch of the same size.

    Each step minimises ``L(task batch) + lam * L(memory batch)`` through one
    backward pass over the concatenated rows, task rows weighted ``1 / B_t``
    and memory rows ``lam / B_m``. The losses of every step of the last call
    are kept in ``step_losses``.
    """

    def __init__(self):
        self.step_losses: List[float] = []

    def local_update(
        self,
        params: ModelParams,
        task: Task,
        buffer: MemoryBuffer,
        spec: LocalUpdateSpec,
        rngs: TrainingRngs,
        class_table: Optional[Dict[int, Tuple[int, ...]]] = None,
    ) -> Tuple[ModelParams, MemoryBuffer]:
        if len(task.train) == 0:
            raise ContractViolation(f"task {task.task_id} has no training rows")
        policy = spec.policy
        policy.begin_task(buffer, task, spec.epochs)
        num_outputs = params.num_outputs
        step_losses: List[float] = []
        for epoch in range(1, spec.epochs + 1):
            for idx in iterate_minibatches(len(task.train), spec.batch_size, rngs.shuffle):
                batch = task.batch(idx)
                batch.logit_mask = build_logit_mask(batch.task_ids, class_table, num_outputs)
                memory_batch = sample_memory_batch(buffer, spec.batch_size, rngs.memory)
                loss = self._step(params, batch, memory_batch, spec, class_table)
                step_losses.append(loss)
                policy.observe(buffer, batch, epoch)
            if policy.needs_epoch_stats:
                mask = build_logit_mask(np.full(len(task.train), task.task_id), class_table, num_outputs)
                correct, losses = per_example_stats(params, task.train.inputs, task.train.labels, mask)
                policy.end_epoch(buffer, epoch, correct, losses)
            logger.debug(f"Task {task.task_id} epoch {epoch}/{spec.epochs}: last loss {step_losses[-1]:.4f}")
        policy.finish_task(buffer)
        self.step_losses = step_losses
        return params, buffer

    def _step(
        self,
        params: ModelParams,
        batch: Batch,
        memory_batch: Optional[Batch],
        spec: LocalUpdateSpec,
        class_table: Optional[Dict[int, Tuple[int, ...]]],
    ) -> float:
        if memory_batch is None or spec.lam == 0:
            _, loss = sgd_step(params, batch, spec.learning_rate)
            return loss
        task_rows, memory_rows = len(batch), len(memory_batch)
        weights = np.concatenate([
            np.full(task_rows, 1.0 / task_rows),
            np.full(memory_rows, spec.lam / memory_rows),
        ])
        task_ids = np.concatenate([batch.task_ids, memory_batch.task_ids])
        joint = Batch(
            inputs=np.concatenate([batch.inputs, memory_batch.inputs]),
            labels=np.concatenate([batch.labels, memory_batch.labels]),
            task_ids=task_ids,
            sample_weights=weights,
            logit_mask=build_logit_mask(task_ids, class_table, params.num_outputs),
        )
        _, loss = sgd_step(params, joint, spec.learning_rate)
        return loss
