import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)


class ModelParams:
    """Weights and biases of a dense network.

    Hidden layers use a rectified-linear activation, the output layer is
    the identity. ``weights[k]`` has shape ``(out, in)``.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        if len(weights) == 0 or len(weights) != len(biases):
            raise ContractViolation("a network needs one bias per weight matrix and at least one layer")
        self.weights: List[np.ndarray] = [np.array(w, dtype=np.float64) for w in weights]
        self.biases: List[np.ndarray] = [np.array(b, dtype=np.float64) for b in biases]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ContractViolation(f"layer {k}: weight {w.shape} and bias {b.shape} do not match")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ContractViolation(
                    f"layer {k} expects {w.shape[1]} inputs but layer {k - 1} produces {self.weights[k - 1].shape[0]}"
                )

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def num_outputs(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> List[int]:
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in zip(self.weights, self.biases))

    def snapshot(self) -> "ModelParams":
        """Return an independent deep copy."""
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def restore(self, other: "ModelParams") -> None:
        """Overwrite this instance in place with the values of ``other``."""
        if other.layer_sizes != self.layer_sizes:
            raise ContractViolation(f"cannot restore {other.layer_sizes} into {self.layer_sizes}")
        for k in range(self.num_layers):
            self.weights[k][...] = other.weights[k]
            self.biases[k][...] = other.biases[k]

    def equals(self, other: "ModelParams") -> bool:
        """Bit-exact comparison."""
        if other.layer_sizes != self.layer_sizes:
            return False
        return all(
            np.array_equal(a, b) for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        return cls([np.asarray(w) for w in data["weights"]], [np.asarray(b) for b in data["biases"]])

    def __repr__(self) -> str:
        return f"ModelParams(layer_sizes={self.layer_sizes})"


def init_params(layer_sizes: Sequence[int], seed: int) -> ModelParams:
    """Initialise a network uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

    Args:
        layer_sizes: Input width, hidden widths and output width
        seed: Seed for the initialisation stream

    Returns:
        ModelParams: Fresh network
    """
    if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
        raise ContractViolation(f"invalid layer sizes {list(layer_sizes)}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    logger.debug(f"Initialised network {list(layer_sizes)} with seed {seed}")
    return ModelParams(weights, biases)


@dataclass
class Batch:
    """A minibatch of rows.

    ``sample_weights`` replaces the default 1/B weighting of the mean loss;
    ``logit_mask`` marks the output classes each row may predict.
    """

    inputs: np.ndarray
    labels: np.ndarray
    task_ids: np.ndarray
    source_index: Optional[np.ndarray] = None
    sample_weights: Optional[np.ndarray] = None
    logit_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.task_ids = np.asarray(self.task_ids, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ContractViolation(f"batch inputs must be a matrix, got shape {self.inputs.shape}")
        size = self.inputs.shape[0]
        if size < 1:
            raise ContractViolation("a batch needs at least one row")
        if self.labels.shape != (size,) or self.task_ids.shape != (size,):
            raise ContractViolation("labels and task ids must have one entry per row")
        if self.source_index is not None:
            self.source_index = np.asarray(self.source_index, dtype=np.int64)
        if self.sample_weights is not None:
            self.sample_weights = np.asarray(self.sample_weights, dtype=np.float64)
            if self.sample_weights.shape != (size,):
                raise ContractViolation("sample weights must have one entry per row")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class TrainConfig:
    """Optimisation settings.

    ``lam`` is the weight of the memory loss; it is stored as ``lambda`` in
    configuration files.
    """

    learning_rate: float = 0.1
    epochs: int = 5
    batch_size: int = 10
    lam: float = 1.0
    hidden_sizes: Tuple[int, ...] = (100, 100)
    rng_seed: int = 0

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        bad = []
        if not self.learning_rate > 0:
            bad.append("learning_rate")
        if int(self.epochs) < 1:
            bad.append("epochs")
        if int(self.batch_size) < 1:
            bad.append("batch_size")
        if self.lam < 0:
            bad.append("lambda")
        if any(h < 1 for h in self.hidden_sizes):
            bad.append("hidden_sizes")
        if bad:
            raise ConfigurationError("invalid training configuration", bad)

    def layer_sizes(self, input_dim: int, num_outputs: int) -> List[int]:
        return [int(input_dim)] + list(self.hidden_sizes) + [int(num_outputs)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lambda": self.lam,
            "hidden_sizes": list(self.hidden_sizes),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        kwargs = dict(data)
        if "lambda" in kwargs:
            kwargs["lam"] = kwargs.pop("lambda")
        return cls(**kwargs)
