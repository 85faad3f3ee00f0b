from .base_update import BaseLocalUpdate, LocalUpdateSpec, TrainingRngs
from .er_update import ExperienceReplay
from .driver import StreamRun, StreamRunner, StreamState, evaluate_task, run_stream

__all__ = [
    'BaseLocalUpdate', 'LocalUpdateSpec', 'TrainingRngs',
    'ExperienceReplay',
    'StreamRun', 'StreamRunner', 'StreamState', 'evaluate_task', 'run_stream',
]
