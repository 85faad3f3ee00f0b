from .plan import OBJECTIVES, STRIDE_PRESETS, SearchTrace, SimConfig, SwitchingPlan
from .binary_search import candidate_grid, global_bs, search_stride, stride_bisection
from .simulation import GlobalSimulator, global_sim, staged_budget
from .gps import PseudoTaskChooser, gps_run
from .oracle import OracleChooser, offline_oracle_search, replay_score
from .metrics import global_loss
from .sweep import is_unimodal, sweep_switching_profile, unimodal_fraction

__all__ = [
    'OBJECTIVES', 'STRIDE_PRESETS', 'SearchTrace', 'SimConfig', 'SwitchingPlan',
    'candidate_grid', 'global_bs', 'search_stride', 'stride_bisection',
    'GlobalSimulator', 'global_sim', 'staged_budget',
    'PseudoTaskChooser', 'gps_run',
    'OracleChooser', 'offline_oracle_search', 'replay_score',
    'global_loss',
    'is_unimodal', 'sweep_switching_profile', 'unimodal_fraction',
]
