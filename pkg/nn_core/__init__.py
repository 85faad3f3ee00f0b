from .params import Batch, ModelParams, TrainConfig, init_params
from .network import (
    backprop,
    cross_entropy,
    evaluate,
    forward,
    iterate_minibatches,
    log_softmax,
    per_example_loss,
    per_example_stats,
    predict,
    sgd_step,
    softmax,
    train,
)

__all__ = [
    'Batch', 'ModelParams', 'TrainConfig', 'init_params',
    'backprop', 'cross_entropy', 'evaluate', 'forward', 'iterate_minibatches',
    'log_softmax', 'per_example_loss', 'per_example_stats', 'predict', 'sgd_step',
    'softmax', 'train',
]
