"""
Dense tensor helpers on top of numpy.

Tensors are plain C-contiguous ndarrays of rank <= 4. Functions here never
mutate their inputs.
"""
from typing import Any, Sequence, Tuple, TypeAlias, Union

import numpy as np
import numpy.typing as npt

from ..errors import DimensionError, NcConvError

Tensor: TypeAlias = npt.NDArray[Any]
Rng: TypeAlias = np.random.Generator
Axis: TypeAlias = Union[int, Tuple[int, ...]]

DTYPES = {
    "float32": np.float32,
    "float64": np.float64,
}


def resolve_dtype(name: str) -> "np.dtype[Any]":
    try:
        return np.dtype(DTYPES[name])
    except KeyError as e:
        raise NcConvError(f"unsupported element type {name!r}, expected one of {sorted(DTYPES)}") from e


def dtype_name(dtype: "npt.DTypeLike") -> str:
    return np.dtype(dtype).name


def make_rng(seed: int, *keys: int) -> Rng:
    """
    PCG64 generator. Extra keys derive independent, reproducible streams
    from the same base seed, e.g. make_rng(seed, epoch).
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *keys])))


def as_tensor(data: "npt.ArrayLike", dtype: "npt.DTypeLike" = np.float64) -> Tensor:
    return np.ascontiguousarray(np.asarray(data, dtype=dtype))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {tuple(a.shape)} by {tuple(b.shape)}")
    return np.matmul(a, b)


def randn(
        shape: Sequence[int],
        rng: Rng,
        mean: float = 0.0,
        std: float = 1.0,
        dtype: "npt.DTypeLike" = np.float64,
) -> Tensor:
    if std < 0:
        raise NcConvError(f"std must be non-negative, got {std}")
    # draw in float64 so the stream does not depend on the element type
    samples = rng.standard_normal(size=tuple(shape))
    return np.ascontiguousarray(mean + std * samples, dtype=dtype)


def reduce_stats(t: Tensor, axis: Axis) -> Tuple[Tensor, Tensor]:
    """
    Mean and population variance (divisor = count) along `axis`.
    """
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    if len(axes) == 0:
        raise DimensionError("reduce_stats needs at least one axis")
    for ax in axes:
        if not -t.ndim <= ax < t.ndim:
            raise DimensionError(f"axis {ax} out of range for shape {tuple(t.shape)}")
        if t.shape[ax] == 0:
            raise DimensionError(f"cannot reduce over empty axis {ax} of shape {tuple(t.shape)}")
    mean = t.mean(axis=axes)
    var = ((t - np.expand_dims(mean, axes)) ** 2).mean(axis=axes)
    return mean, var
