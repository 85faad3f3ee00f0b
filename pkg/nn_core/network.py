"""Forward pass, cross-entropy, backpropagation and plain SGD for dense networks."""

import logging
from typing import Any, Iterator, List, Optional, Tuple

import numpy as np

from utils.errors import ContractViolation, NumericError
from .params import Batch, ModelParams, TrainConfig

logger = logging.getLogger(__name__)


def _check_inputs(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    if inputs.ndim != 2 or inputs.shape[1] != params.input_dim:
        raise ContractViolation(
            f"input width {inputs.shape[-1] if inputs.ndim else 0} does not match network input {params.input_dim}"
        )
    return inputs


def _apply_mask(logits: np.ndarray, logit_mask: Optional[np.ndarray]) -> np.ndarray:
    if logit_mask is None:
        return logits
    mask = np.asarray(logit_mask, dtype=bool)
    if mask.shape != logits.shape:
        raise ContractViolation(f"logit mask {mask.shape} does not match logits {logits.shape}")
    return np.where(mask, logits, -np.inf)


def _forward_layers(params: ModelParams, inputs: np.ndarray) -> List[np.ndarray]:
    """Return the activations of every layer, inputs first and logits last."""
    activations = [inputs]
    hidden = inputs
    last = params.num_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = hidden @ w.T + b
        hidden = z if k == last else np.maximum(z, 0.0)
        activations.append(hidden)
    return activations


def forward(params: ModelParams, inputs: np.ndarray, logit_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Compute logits for a matrix of inputs.

    Args:
        params: Network
        inputs: Matrix of shape (rows, input_dim)
        logit_mask: Optional boolean matrix; masked entries become -inf

    Returns:
        np.ndarray: Logits of shape (rows, num_outputs)
    """
    inputs = _check_inputs(params, inputs)
    return _apply_mask(_forward_layers(params, inputs)[-1], logit_mask)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(logits - np.max(logits, axis=1, keepdims=True))
    return shifted / np.sum(shifted, axis=1, keepdims=True)


def _check_labels(labels: np.ndarray, num_classes: int, rows: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (rows,):
        raise ContractViolation(f"expected {rows} labels, got shape {labels.shape}")
    if rows and (labels.min() < 0 or labels.max() >= num_classes):
        raise ContractViolation(f"label out of range for {num_classes} classes")
    return labels


def per_example_loss(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Negative log-likelihood of the true label for every row."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(labels, logits.shape[1], logits.shape[0])
    return -log_softmax(logits)[np.arange(logits.shape[0]), labels]


def cross_entropy(logits: np.ndarray, labels: np.ndarray, sample_weights: Optional[np.ndarray] = None) -> float:
    """Mean cross-entropy, or the weighted sum when ``sample_weights`` is given."""
    losses = per_example_loss(logits, labels)
    if sample_weights is None:
        return float(np.mean(losses))
    return float(np.dot(np.asarray(sample_weights, dtype=np.float64), losses))


def backprop(
    params: ModelParams,
    inputs: np.ndarray,
    labels: np.ndarray,
    sample_weights: Optional[np.ndarray] = None,
    logit_mask: Optional[np.ndarray] = None,
) -> Tuple[float, List[np.ndarray], List[np.ndarray], np.ndarray]:
    """Loss and gradients of the (weighted) cross-entropy.

    Returns:
        Tuple of (loss, weight gradients, bias gradients, per-row losses)
    """
    inputs = _check_inputs(params, inputs)
    rows = inputs.shape[0]
    labels = _check_labels(labels, params.num_outputs, rows)
    if sample_weights is None:
        weights = np.full(rows, 1.0 / rows)
    else:
        weights = np.asarray(sample_weights, dtype=np.float64)

    activations = _forward_layers(params, inputs)
    logits = _apply_mask(activations[-1], logit_mask)
    log_probs = log_softmax(logits)
    losses = -log_probs[np.arange(rows), labels]
    loss = float(np.dot(weights, losses))

    delta = np.exp(log_probs)
    delta[np.arange(rows), labels] -= 1.0
    delta *= weights[:, None]

    grad_w: List[np.ndarray] = [np.empty(0)] * params.num_layers
    grad_b: List[np.ndarray] = [np.empty(0)] * params.num_layers
    for k in range(params.num_layers - 1, -1, -1):
        grad_w[k] = delta.T @ activations[k]
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * (activations[k] > 0)
    return loss, grad_w, grad_b, losses


def sgd_step(params: ModelParams, batch: Batch, lr: float) -> Tuple[ModelParams, float]:
    """Apply one SGD update in place.

    Args:
        params: Network, updated in place
        batch: Rows to fit; ``batch.sample_weights`` overrides the mean
        lr: Learning rate

    Returns:
        Tuple of (params, loss before the update)

    Raises:
        NumericError: If any gradient entry is not finite
    """
    loss, grad_w, grad_b, _ = backprop(
        params, batch.inputs, batch.labels, batch.sample_weights, batch.logit_mask
    )
    for k in range(params.num_layers):
        if not (np.all(np.isfinite(grad_w[k])) and np.all(np.isfinite(grad_b[k]))):
            raise NumericError(f"non-finite gradient in layer {k} (loss {loss})")
    for k in range(params.num_layers):
        params.weights[k] -= lr * grad_w[k]
        params.biases[k] -= lr * grad_b[k]
    return params, loss


def predict(params: ModelParams, inputs: np.ndarray, logit_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    return np.argmax(forward(params, inputs, logit_mask), axis=1)


def evaluate(params: ModelParams, dataset: Any, logit_mask: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """Accuracy and mean loss on a dataset.

    Args:
        params: Network
        dataset: Any object exposing ``inputs`` and ``labels`` (a ``Batch`` or a task split)
        logit_mask: Optional boolean mask of admissible classes per row

    Returns:
        Tuple of (accuracy in [0, 1], mean cross-entropy)
    """
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    if inputs.shape[0] == 0:
        raise ContractViolation("cannot evaluate on an empty dataset")
    if logit_mask is None:
        logit_mask = getattr(dataset, "logit_mask", None)
    logits = forward(params, inputs, logit_mask)
    losses = per_example_loss(logits, labels)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
    return accuracy, float(np.mean(losses))


def per_example_stats(
    params: ModelParams, inputs: np.ndarray, labels: np.ndarray, logit_mask: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Correctness flags and losses for every row."""
    logits = forward(params, inputs, logit_mask)
    labels = np.asarray(labels, dtype=np.int64)
    return np.argmax(logits, axis=1) == labels, per_example_loss(logits, labels)


def iterate_minibatches(count: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Yield shuffled index blocks covering ``range(count)``; the last one may be short."""
    order = rng.permutation(count)
    for start in range(0, count, batch_size):
        yield order[start:start + batch_size]


def train(
    params: ModelParams,
    inputs: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    rng: Optional[np.random.Generator] = None,
    logit_mask: Optional[np.ndarray] = None,
    task_id: int = 1,
) -> Tuple[ModelParams, List[float]]:
    """Plain minibatch SGD on one dataset.

    Returns:
        Tuple of (params, per-step losses)
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if inputs.shape[0] == 0:
        raise ContractViolation("cannot train on an empty dataset")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    losses: List[float] = []
    for epoch in range(config.epochs):
        for idx in iterate_minibatches(inputs.shape[0], config.batch_size, rng):
            batch = Batch(
                inputs=inputs[idx],
                labels=labels[idx],
                task_ids=np.full(len(idx), task_id),
                logit_mask=None if logit_mask is None else logit_mask[idx],
            )
            _, loss = sgd_step(params, batch, config.learning_rate)
            losses.append(loss)
        logger.debug(f"epoch {epoch + 1}/{config.epochs}: last loss {losses[-1]:.4f}")
    return params, losses
