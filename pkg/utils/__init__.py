from .errors import (
    ReplayEngineError,
    ContractViolation,
    NumericError,
    IngestionError,
    ConfigurationError,
    UnsupportedTransformError,
    ReportError,
    exit_code_for,
)
from .seeding import SEED_NAMES, SeedBundle, derive_seed, make_rng

__all__ = [
    'ReplayEngineError', 'ContractViolation', 'NumericError', 'IngestionError',
    'ConfigurationError', 'UnsupportedTransformError', 'ReportError', 'exit_code_for',
    'SEED_NAMES', 'SeedBundle', 'derive_seed', 'make_rng',
]
