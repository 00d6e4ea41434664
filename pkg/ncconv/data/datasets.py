import dataclasses
from typing import Iterator, Optional, Tuple

import numpy as np
import numpy.typing as npt

from ..core.tensor import Rng, Tensor, randn
from ..data_types import Dataset
from ..errors import ConfigError

Batch = Tuple[Tensor, Tensor]


def channel_stats(images: Tensor) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    if images.shape[0] == 0:
        channels = images.shape[1]
        return (0.0,) * channels, (1.0,) * channels
    mean = images.mean(axis=(0, 2, 3), dtype=np.float64)
    std = images.std(axis=(0, 2, 3), dtype=np.float64)
    return tuple(float(m) for m in mean), tuple(float(s) if s > 0 else 1.0 for s in std)


def normalize_batch(images: Tensor, ds: Dataset, dtype: "npt.DTypeLike" = np.float32) -> Tensor:
    """
    Per-channel standardization with the dataset's stored statistics; a
    dataset without statistics passes through unchanged.
    """
    out = images.astype(dtype)
    if ds.channel_mean:
        mean = np.asarray(ds.channel_mean, dtype=dtype)[:, None, None]
        std = np.asarray(ds.channel_std, dtype=dtype)[:, None, None]
        out = (out - mean) / std
    return out


def take(ds: Dataset, indices: Tensor, name: Optional[str] = None) -> Dataset:
    return dataclasses.replace(
        ds,
        images=ds.images[indices],
        labels=ds.labels[indices],
        name=name or ds.name,
    )


def subset(ds: Dataset, n_per_class: int, seed: int) -> Dataset:
    """
    Exactly n_per_class samples of every class, chosen deterministically;
    source order is kept.
    """
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in range(ds.class_count):
        members = np.flatnonzero(ds.labels == cls)
        if members.size < n_per_class:
            raise ConfigError(
                f"{ds.name}: class {cls} has {members.size} samples, {n_per_class} requested"
            )
        chosen.append(rng.permutation(members)[:n_per_class])
    indices = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)
    return take(ds, indices, f"{ds.name}-{n_per_class}pc")


def batches(ds: Dataset, batch_size: int, shuffle_seed: Optional[int] = None) -> Iterator[Tuple[Tensor, Batch]]:
    """
    Yields (indices, (images, labels)); the final short batch is kept.
    """
    if batch_size < 1:
        raise ConfigError(f"batch size must be positive, got {batch_size}")
    order = np.arange(len(ds))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(order)
    for start in range(0, order.size, batch_size):
        indices = order[start:start + batch_size]
        yield indices, (ds.images[indices], ds.labels[indices])


def synth_classification(
        n: int,
        classes: int,
        shape: Tuple[int, int, int],
        rng: Rng,
        separable: bool = True,
) -> Dataset:
    """
    Class-conditional Gaussian blobs. Class means are N(0, 1) per pixel; the
    noise std is 0.1 when separable, 1.0 otherwise. Labels cycle through the
    classes so every class is equally represented.
    """
    means = randn((classes, *shape), rng)
    labels = np.arange(n, dtype=np.int64) % classes if classes else np.zeros(0, dtype=np.int64)
    noise = randn((n, *shape), rng, std=0.1 if separable else 1.0)
    images = (means[labels] + noise).astype(np.float32)
    return Dataset(images=images, labels=labels, class_count=classes, name=f"synth-{n}x{classes}")
