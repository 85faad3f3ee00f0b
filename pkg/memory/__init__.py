from .buffer import (
    MemoryBuffer,
    StagingSlot,
    TaskSlot,
    balanced_quotas,
    check_invariants,
    commit_staging,
    rebuild_for_new_task,
    sample_memory_batch,
    slot_budgets,
)
from .updates import (
    CurriculumState,
    cur_res_update,
    cur_ring_full_update,
    hybrid_update,
    implicit_curriculum_rank,
    random_selection_fill,
    refresh_easy_pool,
    reservoir_update,
    ring_full_update,
    start_curriculum,
)
from .base_policy import BaseMemoryPolicy
from .policies import (
    CurResPolicy,
    CurRingFullPolicy,
    HybridPolicy,
    MixedPolicy,
    RandomSelectionPolicy,
    ReservoirPolicy,
    RingFullPolicy,
    DEFAULT_GAMMA,
    DEFAULT_RING_GAMMA,
    create_policy,
)

__all__ = [
    'MemoryBuffer', 'StagingSlot', 'TaskSlot', 'balanced_quotas', 'check_invariants',
    'commit_staging', 'rebuild_for_new_task', 'sample_memory_batch', 'slot_budgets',
    'CurriculumState', 'cur_res_update', 'cur_ring_full_update', 'hybrid_update',
    'implicit_curriculum_rank', 'random_selection_fill', 'refresh_easy_pool',
    'reservoir_update', 'ring_full_update', 'start_curriculum',
    'BaseMemoryPolicy',
    'CurResPolicy', 'CurRingFullPolicy', 'HybridPolicy', 'MixedPolicy',
    'RandomSelectionPolicy', 'ReservoirPolicy', 'RingFullPolicy', 'DEFAULT_GAMMA', 'DEFAULT_RING_GAMMA',
    'create_policy',
]
