from .config import BENCHMARK_KINDS, METHODS, BenchmarkSpec, ExperimentConfig, load_config
from .runner import SCHEMA_VERSION, RepeatResult, RunResult, read_result, run_experiment, write_result
from .reporting import comparison_table, forgetting_rows, report, write_sweep_csv

__all__ = [
    'BENCHMARK_KINDS', 'METHODS', 'BenchmarkSpec', 'ExperimentConfig', 'load_config',
    'SCHEMA_VERSION', 'RepeatResult', 'RunResult', 'read_result', 'run_experiment', 'write_result',
    'comparison_table', 'forgetting_rows', 'report', 'write_sweep_csv',
]
