import math
import os
import sys

import numpy as np
import pytest

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from nn_core import (
    Batch,
    ModelParams,
    TrainConfig,
    backprop,
    cross_entropy,
    evaluate,
    forward,
    init_params,
    predict,
    sgd_step,
    softmax,
    train,
)
from utils.errors import ConfigurationError, ContractViolation, NumericError


def _loss_at(params, inputs, labels):
    loss, _, _, _ = backprop(params, inputs, labels)
    return loss


def _relative_error(analytic, numeric):
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-6)
    return np.max(np.abs(analytic - numeric)) / scale


@pytest.fixture
def small_net():
    return init_params([6, 5, 4, 3], seed=11)


def test_zero_network_gives_zero_logits():
    params = ModelParams([np.zeros((4, 3)), np.zeros((2, 4))], [np.zeros(4), np.zeros(2)])
    logits = forward(params, np.random.default_rng(0).normal(size=(5, 3)))
    assert np.array_equal(logits, np.zeros((5, 2)))


def test_identity_layer_returns_inputs():
    params = ModelParams([np.eye(4)], [np.zeros(4)])
    x = np.array([[0.5, -1.0, 2.0, 3.0]])
    assert np.array_equal(forward(params, x), x)


def test_forward_matches_straight_line_products():
    params = init_params([784, 100, 100, 10], seed=3)
    x = np.random.default_rng(1).uniform(size=784)
    h1 = [max(0.0, sum(params.weights[0][i, k] * x[k] for k in range(784)) + params.biases[0][i]) for i in range(100)]
    h2 = [max(0.0, sum(params.weights[1][i, k] * h1[k] for k in range(100)) + params.biases[1][i]) for i in range(100)]
    out = [sum(params.weights[2][i, k] * h2[k] for k in range(100)) + params.biases[2][i] for i in range(10)]
    assert np.allclose(forward(params, x)[0], out, rtol=1e-10, atol=1e-12)


def test_forward_rejects_wrong_width(small_net):
    with pytest.raises(ContractViolation):
        forward(small_net, np.zeros((2, 7)))


def test_init_params_bounds_and_chain():
    params = init_params([10, 7, 3], seed=0)
    assert params.layer_sizes == [10, 7, 3]
    assert np.all(np.abs(params.weights[0]) <= 1 / np.sqrt(10))
    assert np.all(np.abs(params.weights[1]) <= 1 / np.sqrt(7))
    with pytest.raises(ContractViolation):
        ModelParams([np.zeros((3, 4)), np.zeros((2, 5))], [np.zeros(3), np.zeros(2)])


def test_uniform_logits_loss_is_log_classes():
    assert cross_entropy(np.zeros((4, 10)), np.array([0, 3, 5, 9])) == pytest.approx(math.log(10), abs=1e-12)


def test_confident_correct_loss_is_tiny():
    logits = np.zeros((1, 10))
    logits[0, 4] = 50.0
    assert cross_entropy(logits, np.array([4])) < 1e-6


def test_cross_entropy_matches_naive_sum():
    rng = np.random.default_rng(7)
    logits = rng.normal(scale=3.0, size=(20, 6))
    labels = rng.integers(0, 6, size=20)
    naive = math.fsum(
        -(row[y] - math.log(math.fsum(math.exp(v) for v in row))) for row, y in zip(logits.tolist(), labels.tolist())
    ) / 20
    assert cross_entropy(logits, labels) == pytest.approx(naive, rel=1e-12)


def test_cross_entropy_rejects_out_of_range_label():
    with pytest.raises(ContractViolation):
        cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


def test_softmax_rows_sum_to_one():
    logits = np.random.default_rng(2).normal(scale=20.0, size=(50, 10))
    assert np.all(np.abs(softmax(logits).sum(axis=1) - 1.0) < 1e-12)


def test_zero_learning_rate_leaves_params(small_net):
    before = small_net.snapshot()
    batch = Batch(np.ones((3, 6)), np.array([0, 1, 2]), np.ones(3))
    sgd_step(small_net, batch, 0.0)
    assert small_net.equals(before)


def test_softmax_regression_step_matches_closed_form():
    rng = np.random.default_rng(5)
    w, b = rng.normal(size=(3, 4)), rng.normal(size=3)
    x, y = rng.normal(size=4), 2
    params = ModelParams([w], [b])
    p = softmax((w @ x + b)[None, :])[0]
    p[y] -= 1.0
    sgd_step(params, Batch(x[None, :], np.array([y]), np.array([1])), 0.5)
    assert np.allclose(params.weights[0], w - 0.5 * np.outer(p, x), atol=1e-14)
    assert np.allclose(params.biases[0], b - 0.5 * p, atol=1e-14)


def test_backprop_matches_finite_differences():
    rng = np.random.default_rng(2024)
    h = 1e-5
    for trial in range(50):
        sizes = [int(rng.integers(2, 6))] + [int(rng.integers(2, 6)) for _ in range(int(rng.integers(1, 3)))] + [3]
        params = init_params(sizes, seed=trial)
        inputs = rng.normal(size=(4, sizes[0]))
        labels = rng.integers(0, 3, size=4)
        _, grad_w, grad_b, _ = backprop(params, inputs, labels)
        for k in range(params.num_layers):
            for tensor, grad in ((params.weights[k], grad_w[k]), (params.biases[k], grad_b[k])):
                numeric = np.zeros_like(tensor)
                for idx in np.ndindex(tensor.shape):
                    original = tensor[idx]
                    tensor[idx] = original + h
                    up = _loss_at(params, inputs, labels)
                    tensor[idx] = original - h
                    down = _loss_at(params, inputs, labels)
                    tensor[idx] = original
                    numeric[idx] = (up - down) / (2 * h)
                assert _relative_error(grad, numeric) < 1e-4


def test_non_finite_gradient_names_layer(small_net):
    small_net.weights[1][0, 0] = np.nan
    batch = Batch(np.ones((2, 6)), np.array([0, 1]), np.ones(2))
    with pytest.raises(NumericError, match="layer"):
        sgd_step(small_net, batch, 0.1)


def test_evaluate_one_hot_network():
    params = ModelParams([100.0 * np.eye(3)], [np.zeros(3)])
    labels = np.array([0, 1, 2, 2, 1])
    data = Batch(np.eye(3)[labels], labels, np.ones(5))
    accuracy, loss = evaluate(params, data)
    assert accuracy == 1.0
    assert loss < 1e-6


def test_evaluate_constant_network_uses_lowest_index():
    params = ModelParams([np.zeros((10, 4))], [np.zeros(10)])
    labels = np.repeat(np.arange(10), 10)
    data = Batch(np.random.default_rng(0).normal(size=(100, 4)), labels, np.ones(100))
    accuracy, loss = evaluate(params, data)
    assert accuracy == pytest.approx(0.1)
    assert loss == pytest.approx(math.log(10))
    assert np.all(predict(params, data.inputs) == 0)


def test_evaluate_matches_example_loop():
    params = init_params([5, 8, 4], seed=9)
    rng = np.random.default_rng(9)
    data = Batch(rng.normal(size=(100, 5)), rng.integers(0, 4, size=100), np.ones(100))
    correct, losses = 0, []
    for x, y in zip(data.inputs, data.labels):
        logits = forward(params, x)
        correct += int(np.argmax(logits[0]) == y)
        losses.append(cross_entropy(logits, np.array([y])))
    accuracy, loss = evaluate(params, data)
    assert accuracy == correct / 100
    assert loss == pytest.approx(np.mean(losses), rel=1e-12)


def test_evaluate_rejects_empty_dataset(small_net):
    class Empty:
        inputs = np.zeros((0, 6))
        labels = np.zeros(0, dtype=np.int64)

    with pytest.raises(ContractViolation):
        evaluate(small_net, Empty())


def test_training_separable_toy_set_reaches_full_accuracy():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1], 50)
    inputs = np.column_stack([np.where(labels == 1, 1.0, -1.0) * rng.uniform(1.0, 3.0, size=100), rng.normal(size=100)])
    config = TrainConfig(learning_rate=0.1, epochs=20, batch_size=10, hidden_sizes=(8,))
    params = init_params(config.layer_sizes(2, 2), seed=1)
    _, losses = train(params, inputs, labels, config)
    assert len(losses) == 200
    accuracy, _ = evaluate(params, Batch(inputs, labels, np.ones(100)))
    assert accuracy == 1.0


def test_training_is_deterministic():
    rng = np.random.default_rng(4)
    inputs, labels = rng.normal(size=(60, 5)), rng.integers(0, 3, size=60)
    config = TrainConfig(epochs=2, hidden_sizes=(6,))
    first = init_params(config.layer_sizes(5, 3), seed=2)
    second = init_params(config.layer_sizes(5, 3), seed=2)
    train(first, inputs, labels, config)
    train(second, inputs, labels, config)
    assert first.equals(second)


def test_snapshot_and_dict_round_trip(small_net):
    copy = small_net.snapshot()
    small_net.weights[0] += 1.0
    assert not small_net.equals(copy)
    small_net.restore(copy)
    assert small_net.equals(copy)
    assert ModelParams.from_dict(small_net.to_dict()).equals(small_net)


def test_train_config_validation_lists_fields():
    with pytest.raises(ConfigurationError) as info:
        TrainConfig(learning_rate=0.0, batch_size=0)
    assert info.value.fields == ["learning_rate", "batch_size"]
    assert TrainConfig.from_dict({"lambda": 0.5}).lam == 0.5
