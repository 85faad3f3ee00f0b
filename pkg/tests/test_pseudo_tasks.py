import os
import sys

import numpy as np
import pytest

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from nn_core import TrainConfig
from pseudo_tasks import (
    SynthesisSpec,
    blur_images,
    gaussian_kernel,
    rotate_images,
    stratified_rows,
    synthesize_sequence,
)
from task_streams import (
    SyntheticStreamSpec,
    Task,
    TaskSplit,
    build_synthetic_stream,
    difficulty_profile,
    end_to_end_difficulty,
)
from utils.errors import ConfigurationError, ContractViolation, UnsupportedTransformError


@pytest.fixture
def image_task():
    rng = np.random.default_rng(0)
    features = rng.uniform(size=(50, 25))
    labels = np.repeat(np.arange(4), 10)
    yield Task(1, TaskSplit(features[:40], labels, np.arange(40)),
               TaskSplit(features[40:], labels[:10], np.arange(40, 50)), (0, 1, 2, 3), image_shape=(5, 5))


def test_rotation_by_right_angle_matches_rot90():
    images = np.random.default_rng(1).uniform(size=(3, 6, 6))
    rotated = rotate_images(images, 90.0)
    expected = np.stack([np.rot90(img, k=-1) for img in images])
    assert np.allclose(rotated, expected, atol=1e-9)


def test_zero_rotation_is_identity():
    images = np.random.default_rng(2).uniform(size=(2, 5, 7))
    assert np.allclose(rotate_images(images, 0.0), images)


def test_gaussian_kernel_is_normalised_and_symmetric():
    kernel = gaussian_kernel(5, 1.0)
    assert kernel.shape == (5, 5)
    assert kernel.sum() == pytest.approx(1.0)
    assert np.allclose(kernel, kernel.T)
    assert np.allclose(kernel, kernel[::-1, ::-1])
    assert kernel[2, 2] == kernel.max()


def test_blur_keeps_constant_interior_and_spreads_a_point():
    flat = np.ones((1, 9, 9))
    blurred = blur_images(flat, 1.0, 5)
    assert np.allclose(blurred[0, 2:7, 2:7], 1.0)
    assert blurred[0, 0, 0] < 1.0
    point = np.zeros((1, 9, 9))
    point[0, 4, 4] = 1.0
    assert np.allclose(blur_images(point, 1.0, 5)[0, 2:7, 2:7], gaussian_kernel(5, 1.0))


def test_synthesis_spec_lists_bad_fields():
    with pytest.raises(ConfigurationError) as info:
        SynthesisSpec(method="shear", count=0, blur_kernel=4)
    assert info.value.fields == ["method", "count", "blur_kernel"]


def test_stratified_rows_balance_classes():
    labels = np.array([0] * 10 + [1] * 2 + [2] * 10)
    rows = stratified_rows(labels, 8, np.random.default_rng(0))
    counts = np.bincount(labels[rows], minlength=3)
    assert counts.tolist() == [3, 2, 3]
    assert len(set(rows.tolist())) == 8


def test_permutation_tasks_share_one_subsample(image_task):
    tasks = synthesize_sequence(image_task, SynthesisSpec(count=3, examples_per_task=8, seed=4))
    assert [t.task_id for t in tasks] == [2, 3, 4]
    first = tasks[0]
    assert np.bincount(first.train.labels).tolist() == [2, 2, 2, 2]
    base_rows = image_task.train.rows(first.train.source_index)
    for task in tasks:
        assert len(task.test) == 0
        assert task.class_ids == image_task.class_ids
        assert np.array_equal(task.train.source_index, first.train.source_index)
        assert np.array_equal(np.sort(task.train.inputs, axis=1), np.sort(base_rows, axis=1))
    assert not np.array_equal(tasks[0].train.inputs, tasks[1].train.inputs)


def test_identity_permutation_and_first_id(image_task):
    spec = SynthesisSpec(count=2, examples_per_task=100, seed=1, force_identity=True)
    tasks = synthesize_sequence(image_task, spec, first_task_id=7)
    assert [t.task_id for t in tasks] == [7, 8]
    assert len(tasks[0].train) == 40
    assert np.array_equal(tasks[1].train.inputs, image_task.train.rows(tasks[1].train.source_index))


def test_synthesis_is_seeded(image_task):
    spec = SynthesisSpec(count=2, examples_per_task=12, seed=9)
    first, second = synthesize_sequence(image_task, spec), synthesize_sequence(image_task, spec)
    for a, b in zip(first, second):
        assert np.array_equal(a.train.inputs, b.train.inputs)


def test_rotation_tasks_use_growing_angles(image_task):
    spec = SynthesisSpec(method="rotation", count=2, examples_per_task=8, rotation_step_degrees=90.0)
    tasks = synthesize_sequence(image_task, spec)
    base = image_task.train.rows(tasks[0].train.source_index).reshape(-1, 5, 5)
    quarter = np.stack([np.rot90(img, k=-1) for img in base]).reshape(-1, 25)
    half = np.stack([np.rot90(img, k=2) for img in base]).reshape(-1, 25)
    assert np.allclose(tasks[0].train.inputs, quarter, atol=1e-9)
    assert np.allclose(tasks[1].train.inputs, half, atol=1e-9)


def test_blurring_tasks_grow_sigma(image_task):
    spec = SynthesisSpec(method="blurring", count=2, examples_per_task=8, blur_sigma_step=0.5, blur_kernel=3)
    tasks = synthesize_sequence(image_task, spec)
    base = image_task.train.rows(tasks[0].train.source_index).reshape(-1, 5, 5)
    assert np.allclose(tasks[1].train.inputs, blur_images(base, 1.0, 3).reshape(-1, 25))


def test_image_transforms_need_an_image_shape():
    split = TaskSplit(np.zeros((4, 6)), np.array([0, 1, 0, 1]), np.arange(4))
    flat = Task(1, split, TaskSplit.empty(6), (0, 1))
    with pytest.raises(UnsupportedTransformError) as info:
        synthesize_sequence(flat, SynthesisSpec(method="blurring"))
    assert isinstance(info.value, ContractViolation)
    assert synthesize_sequence(flat, SynthesisSpec())[0].input_dim == 6


def reference_rotation(image, degrees):
    """Pixel-by-pixel rotation about the centre with bilinear sampling and zero fill."""
    h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    turn = np.exp(-1j * np.deg2rad(degrees))
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            source = complex(x - cx, y - cy) * turn
            sx, sy = source.real + cx, source.imag + cy
            left, top = int(np.floor(sx)), int(np.floor(sy))
            total = 0.0
            for yy, wy in ((top, 1.0 - (sy - top)), (top + 1, sy - top)):
                for xx, wx in ((left, 1.0 - (sx - left)), (left + 1, sx - left)):
                    if 0 <= yy < h and 0 <= xx < w:
                        total += wy * wx * image[yy, xx]
            out[y, x] = total
    return out


def test_second_rotation_task_matches_reference_resampler():
    rng = np.random.default_rng(5)
    features = rng.uniform(size=(12, 49))
    labels = np.repeat(np.arange(2), 6)
    task = Task(1, TaskSplit(features, labels, np.arange(12)), TaskSplit.empty(49), (0, 1), image_shape=(7, 7))
    tasks = synthesize_sequence(task, SynthesisSpec(method="rotation", count=2, examples_per_task=12))
    base = task.train.rows(tasks[1].train.source_index).reshape(-1, 7, 7)
    expected = np.stack([reference_rotation(img, 30.0) for img in base]).reshape(-1, 49)
    assert np.allclose(tasks[1].train.inputs, expected, atol=1e-9)
    assert not np.allclose(tasks[1].train.inputs, base.reshape(-1, 49))


def test_permutation_tasks_vary_no_more_than_reinitialised_base():
    stream = build_synthetic_stream(SyntheticStreamSpec(num_tasks=1, dim=10, train_per_task=100, mean_scale=0.4, seed=6))
    base = stream.task(1)
    config = TrainConfig(learning_rate=0.05, epochs=2, batch_size=10, hidden_sizes=(8,))
    replica = synthesize_sequence(base, SynthesisSpec(count=1, examples_per_task=100, force_identity=True))[0]
    replications = [end_to_end_difficulty(replica, config, 2, seed=seed) for seed in range(20)]
    base_variance = float(np.var(np.asarray(replications) * 100.0))

    permuted = synthesize_sequence(base, SynthesisSpec(count=5, examples_per_task=100, seed=1))
    accuracies, variance = difficulty_profile(permuted, config, 2)
    assert len(accuracies) == 5
    assert base_variance > 0.0
    assert variance <= 5.0 * base_variance
