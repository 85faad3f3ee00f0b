"""Reader for the big-endian IDX files MNIST ships in."""

import gzip
import logging
import os
import struct
from typing import Optional, Tuple

import numpy as np

from utils.errors import IngestionError
from .builders import subsample_task
from .types import Task, TaskSplit

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

DATA_ROOT_ENV = "GPS_DATA_ROOT"


def _read_bytes(path: str) -> bytes:
    if not os.path.exists(path):
        raise IngestionError("file not found", path=path)
    opener = gzip.open if path.endswith(".gz") else open
    try:
        with opener(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise IngestionError(f"cannot read file: {e}", path=path)


def _header(data: bytes, path: str, fields: int) -> Tuple[int, ...]:
    size = 4 * fields
    if len(data) < size:
        raise IngestionError(f"truncated header, expected {size} bytes", path=path, offset=len(data))
    return struct.unpack(f">{fields}I", data[:size])


def read_idx_images(path: str) -> np.ndarray:
    """Read an IDX image file into a uint8 array of shape (count, rows, cols)."""
    data = _read_bytes(path)
    magic, count, rows, cols = _header(data, path, 4)
    if magic != IDX_IMAGE_MAGIC:
        raise IngestionError(f"bad image magic number 0x{magic:08x}", path=path, offset=0)
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise IngestionError(
            f"truncated image data, expected {count} images of {rows}x{cols}", path=path, offset=len(data)
        )
    return np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: str) -> np.ndarray:
    """Read an IDX label file into a uint8 vector."""
    data = _read_bytes(path)
    magic, count = _header(data, path, 2)
    if magic != IDX_LABEL_MAGIC:
        raise IngestionError(f"bad label magic number 0x{magic:08x}", path=path, offset=0)
    if len(data) < 8 + count:
        raise IngestionError(f"truncated label data, expected {count} labels", path=path, offset=len(data))
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path: str, labels_path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Load an image/label file pair.

    Args:
        images_path: Path to the IDX image file (optionally gzipped)
        labels_path: Path to the IDX label file (optionally gzipped)

    Returns:
        Tuple of (features scaled to [0, 1] with one flattened image per row, int64 labels)

    Raises:
        IngestionError: Bad magic number, truncated file or count mismatch
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IngestionError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", path=labels_path, offset=4
        )
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return features, labels.astype(np.int64)


def _resolve(root: str, name: str) -> str:
    plain = os.path.join(root, name)
    if os.path.exists(plain):
        return plain
    if os.path.exists(plain + ".gz"):
        return plain + ".gz"
    raise IngestionError("MNIST file not found (also tried .gz)", path=plain)


def resolve_data_root(data_root: Optional[str] = None) -> str:
    root = data_root or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise IngestionError(f"no dataset root given and {DATA_ROOT_ENV} is not set")
    return root


def load_mnist(data_root: Optional[str] = None, subsample: float = 1.0, seed: int = 0) -> Task:
    """Load MNIST as a single task with id 1.

    Test rows get source indices offset by the training size so the two
    splits stay disjoint.

    Args:
        data_root: Directory with the four standard files; defaults to ``$GPS_DATA_ROOT``
        subsample: Fraction of the training split to keep
        seed: Seed for the subsample
    """
    root = resolve_data_root(data_root)
    train_x, train_y = load_idx(_resolve(root, MNIST_FILES["train_images"]), _resolve(root, MNIST_FILES["train_labels"]))
    test_x, test_y = load_idx(_resolve(root, MNIST_FILES["test_images"]), _resolve(root, MNIST_FILES["test_labels"]))
    logger.info(f"Loaded MNIST from {root}: {train_x.shape[0]} train / {test_x.shape[0]} test rows")
    side = int(round(np.sqrt(train_x.shape[1])))
    train = TaskSplit(train_x, train_y, np.arange(train_x.shape[0]))
    test = TaskSplit(test_x, test_y, np.arange(test_x.shape[0]) + train_x.shape[0])
    task = Task(1, train, test, tuple(np.unique(train_y).tolist()), image_shape=(side, side))
    if subsample < 1.0:
        task = subsample_task(task, subsample, seed)
    return task
