from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from nn_core import Batch
from task_streams import Task
from .buffer import MemoryBuffer


class BaseMemoryPolicy(ABC):
    """Base class for memory construction policies.

    A policy decides how the staged task's examples are collected while it
    trains and which ring size it asks for at the task boundary.
    """

    name = "base"
    needs_epoch_stats = False

    def begin_task(self, buffer: MemoryBuffer, task: Task, epochs: int) -> None:
        """Open the staging slot for ``task``.

        Args:
            buffer: Memory to update
            task: Task about to be trained
            epochs: Number of training epochs of the task
        """
        buffer.open_staging(task)

    @abstractmethod
    def observe(self, buffer: MemoryBuffer, batch: Batch, epoch: int) -> None:
        """Feed one training batch of the staged task.

        Args:
            buffer: Memory to update
            batch: Rows just used for an optimisation step
            epoch: 1-based epoch number
        """
        pass

    def end_epoch(self, buffer: MemoryBuffer, epoch: int, correct: np.ndarray, losses: np.ndarray) -> None:
        """Receive per-example correctness and losses after an epoch.

        Only called when ``needs_epoch_stats`` is true.
        """
        pass

    def finish_task(self, buffer: MemoryBuffer) -> None:
        """Called once after the last epoch of the staged task."""
        pass

    @abstractmethod
    def ring_size(self, buffer: MemoryBuffer) -> Optional[int]:
        """Ring size a_i the policy asks for when the staged task is committed.

        Returns:
            int: Ring size in [0, staging budget]
        """
        pass
