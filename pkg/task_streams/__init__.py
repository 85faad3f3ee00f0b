from .types import Example, Task, TaskSplit, TaskStream, build_logit_mask
from .builders import (
    SyntheticStreamSpec,
    build_permuted_stream,
    build_split_stream,
    build_synthetic_stream,
    make_permutation,
    subsample_task,
)
from .idx_loader import DATA_ROOT_ENV, load_idx, load_mnist, read_idx_images, read_idx_labels
from .diagnostics import difficulty_profile, end_to_end_difficulty, summarize_profile, zero_shot_transfer

__all__ = [
    'Example', 'Task', 'TaskSplit', 'TaskStream', 'build_logit_mask',
    'SyntheticStreamSpec', 'build_permuted_stream', 'build_split_stream', 'build_synthetic_stream',
    'make_permutation', 'subsample_task',
    'DATA_ROOT_ENV', 'load_idx', 'load_mnist', 'read_idx_images', 'read_idx_labels',
    'difficulty_profile', 'end_to_end_difficulty', 'summarize_profile', 'zero_shot_transfer',
]
