"""
Readers for the CIFAR-10 binary batches and the MNIST IDX files.

CIFAR-10 record: 1 label byte followed by 3072 pixel bytes, the red plane,
then green, then blue, each 32x32 row-major. IDX files are big-endian with
magic 0x00000803 for images and 0x00000801 for labels.
"""
import gzip
import logging
import os
import struct
from typing import Tuple

import numpy as np

from .datasets import channel_stats
from ..core.tensor import Tensor
from ..data_types import Dataset
from ..errors import DataFormatError

logger = logging.getLogger(__name__)

CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR_RECORDS_PER_FILE = 10000
CIFAR_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_FILE = "test_batch.bin"

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _read_bytes(path: str) -> bytes:
    try:
        if path.endswith(".gz"):
            with gzip.open(path, "rb") as f:
                return f.read()
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise DataFormatError(f"could not read {path}: {e}") from e


def _read_cifar_file(path: str) -> Tuple[Tensor, Tensor]:
    raw = _read_bytes(path)
    expected = CIFAR_RECORD_BYTES * CIFAR_RECORDS_PER_FILE
    if len(raw) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(CIFAR_RECORDS_PER_FILE, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    images = records[:, 1:].reshape(-1, 3, 32, 32)
    return images, labels


def _to_dataset(images: Tensor, labels: Tensor, name: str, classes: int) -> Dataset:
    if labels.size and labels.max() >= classes:
        raise DataFormatError(f"{name}: label {labels.max()} out of range for {classes} classes")
    return Dataset(
        images=images.astype(np.float32) / np.float32(255.0),
        labels=labels,
        class_count=classes,
        name=name,
    )


def _with_stats(train: Dataset, test: Dataset, normalize: bool) -> Tuple[Dataset, Dataset]:
    if normalize:
        mean, std = channel_stats(train.images)
        for ds in (train, test):
            ds.channel_mean, ds.channel_std = mean, std
    return train, test


def load_cifar10(directory: str, normalize: bool = True) -> Tuple[Dataset, Dataset]:
    """
    Returns (train, test); per-channel statistics come from the training split.
    """
    parts = [_read_cifar_file(os.path.join(directory, name)) for name in CIFAR_TRAIN_FILES]
    train_images = np.concatenate([p[0] for p in parts])
    train_labels = np.concatenate([p[1] for p in parts])
    test_images, test_labels = _read_cifar_file(os.path.join(directory, CIFAR_TEST_FILE))
    logger.info("loaded CIFAR-10 from %s: %d train, %d test", directory, len(train_labels), len(test_labels))
    return _with_stats(
        _to_dataset(train_images, train_labels, "cifar10-train", 10),
        _to_dataset(test_images, test_labels, "cifar10-test", 10),
        normalize,
    )


def _resolve(directory: str, name: str) -> str:
    path = os.path.join(directory, name)
    if not os.access(path, os.F_OK) and os.access(path + ".gz", os.F_OK):
        return path + ".gz"
    return path


def parse_idx_images(raw: bytes, source: str = "<bytes>") -> Tensor:
    if len(raw) < 16:
        raise DataFormatError(f"{source}: header needs 16 bytes, found {len(raw)}")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{source}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise DataFormatError(f"{source}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, 1, rows, cols)


def parse_idx_labels(raw: bytes, source: str = "<bytes>") -> Tensor:
    if len(raw) < 8:
        raise DataFormatError(f"{source}: header needs 8 bytes, found {len(raw)}")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DataFormatError(f"{source}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    expected = 8 + count
    if len(raw) != expected:
        raise DataFormatError(f"{source}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


def _load_idx_pair(directory: str, prefix: str) -> Tuple[Tensor, Tensor]:
    images_path = _resolve(directory, f"{prefix}-images-idx3-ubyte")
    labels_path = _resolve(directory, f"{prefix}-labels-idx1-ubyte")
    images = parse_idx_images(_read_bytes(images_path), images_path)
    labels = parse_idx_labels(_read_bytes(labels_path), labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(f"{prefix}: {images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels


def load_mnist_idx(directory: str, normalize: bool = True) -> Tuple[Dataset, Dataset]:
    train_images, train_labels = _load_idx_pair(directory, "train")
    test_images, test_labels = _load_idx_pair(directory, "t10k")
    logger.info("loaded MNIST from %s: %d train, %d test", directory, len(train_labels), len(test_labels))
    return _with_stats(
        _to_dataset(train_images, train_labels, "mnist-train", 10),
        _to_dataset(test_images, test_labels, "mnist-test", 10),
        normalize,
    )
