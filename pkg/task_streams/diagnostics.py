"""Task-difficulty and zero-shot transfer diagnostics."""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from nn_core import ModelParams, TrainConfig, evaluate, init_params, train
from utils.errors import ContractViolation
from .types import Task

logger = logging.getLogger(__name__)


def _eval_split(task: Task):
    return task.test if len(task.test) else task.train


def end_to_end_difficulty(
    task: Task, config: TrainConfig, num_outputs: Optional[int] = None, seed: Optional[int] = None
) -> float:
    """Train a fresh network on ``task`` alone and return its test accuracy.

    Tasks without a test split (pseudo-tasks) are scored on their training rows.
    """
    if len(task.train) == 0:
        raise ContractViolation(f"task {task.task_id} has no training rows")
    outputs = num_outputs or max(task.class_ids) + 1
    init_seed = config.rng_seed if seed is None else seed
    params = init_params(config.layer_sizes(task.input_dim, outputs), init_seed)
    train(params, task.train.inputs, task.train.labels, config, rng=np.random.default_rng(init_seed), task_id=task.task_id)
    accuracy, _ = evaluate(params, _eval_split(task))
    logger.info(f"Task {task.task_id} end-to-end accuracy {accuracy:.4f}")
    return accuracy


def zero_shot_transfer(params: ModelParams, task: Task) -> float:
    """Accuracy on ``task`` without any training on it."""
    accuracy, _ = evaluate(params, _eval_split(task))
    return accuracy


def difficulty_profile(
    tasks: Sequence[Task], config: TrainConfig, num_outputs: Optional[int] = None
) -> Tuple[List[float], float]:
    """End-to-end accuracy of each task and the variance across tasks (in accuracy points)."""
    accuracies = [end_to_end_difficulty(task, config, num_outputs) for task in tasks]
    variance = float(np.var(np.asarray(accuracies) * 100.0))
    return accuracies, variance


def summarize_profile(accuracies: Sequence[float]) -> Dict[str, float]:
    values = np.asarray(accuracies, dtype=np.float64) * 100.0
    return {"mean": float(values.mean()), "variance": float(values.var())}
