from typing import List, Tuple

from nn_core import ModelParams
from replay_trainer import evaluate_task
from task_streams import TaskStream


def global_loss(params: ModelParams, stream: TaskStream) -> Tuple[float, List[float]]:
    """Summed mean test cross-entropy over all tasks of ``stream``.

    Returns:
        Tuple of (total, per-task losses in task order)
    """
    class_table = stream.class_table()
    per_task = [evaluate_task(params, task, class_table)[1] for task in stream.tasks]
    return float(sum(per_task)), per_task
