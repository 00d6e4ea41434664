"""
Normalized Convolution and the standard convolution baseline.

Both share one pipeline: unfold -> (standardize columns) -> GEMM -> per output
channel affine. NC standardizes every im2col column over its I entries with
population statistics and eps added to the std:

    xhat[i, k] = (x[i, k] - mu[k]) / (sigma[k] + eps)

The backward pass is the exact chain rule through mu and sigma, eps included.
"""
import logging
import warnings
from typing import Literal, Optional, Tuple

import numpy as np
import numpy.typing as npt

from .im2col import check_input, fold_batch, unfold_batch
from .parallel import map_samples
from .tensor import Rng, Tensor, matmul, randn
from ..data_types import ConvCache, ConvGeometry, Im2ColMatrix, NcLayerState, PatchStats
from ..errors import DimensionError, StateError

logger = logging.getLogger(__name__)

WeightInit = Literal["normal", "he"]


def center(columns: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Column means of a (..., I, K) array and the centered array. Constant
    columns get their value as mean, so they center to exact zeros.
    """
    first = columns[..., :1, :]
    constant = np.all(columns == first, axis=-2)
    mu = np.where(constant, first[..., 0, :], columns.mean(axis=-2))
    centered = np.where(constant[..., np.newaxis, :], 0.0, columns - mu[..., np.newaxis, :]).astype(columns.dtype, copy=False)
    return mu, centered


def standardize(columns: Tensor, eps: float) -> Tuple[Tensor, PatchStats]:
    """
    Standardize along axis -2 (the I axis) of a (..., I, K) array.
    """
    mu, centered = center(columns)
    sigma = np.sqrt((centered * centered).mean(axis=-2))
    denom = sigma + eps
    xhat = centered / denom[..., np.newaxis, :]
    return xhat, PatchStats(mu=mu, sigma=sigma, denom=denom)


def standardize_backward(grad_xhat: Tensor, columns: Tensor, stats: PatchStats) -> Tensor:
    patch_size = columns.shape[-2]
    _, centered = center(columns)
    projection = (grad_xhat * centered).sum(axis=-2)
    scale = patch_size * stats.sigma * stats.denom
    # sigma == 0 only for constant patches, where centered is 0 as well
    coef = np.divide(projection, scale, out=np.zeros_like(projection), where=stats.sigma > 0)
    grad = grad_xhat - grad_xhat.mean(axis=-2, keepdims=True) - centered * coef[..., np.newaxis, :]
    result: Tensor = grad / stats.denom[..., np.newaxis, :]
    return result


def standardize_columns(m: Im2ColMatrix, eps: float) -> Tuple[Im2ColMatrix, PatchStats]:
    xhat, stats = standardize(m.data, eps)
    return Im2ColMatrix(data=xhat, geometry=m.geometry), stats


def init_layer_state(
        g: ConvGeometry,
        rng: Rng,
        dtype: "npt.DTypeLike" = np.float64,
        epsilon: float = 1e-5,
        init: WeightInit = "normal",
        normalized: bool = True,
) -> NcLayerState:
    g.validate()
    fan_in = g.patch_size
    if normalized and fan_in == 1:
        warnings.warn(
            f"normalized convolution with patch size 1 ({g}) standardizes every patch to 0; "
            "the layer output is beta",
            RuntimeWarning,
            stacklevel=2,
        )
    std = np.sqrt(2.0 / fan_in) if init == "he" else 1.0 / np.sqrt(fan_in)
    logger.debug("init %s conv %s, weight std %.4g", "nc" if normalized else "standard", g, std)
    return NcLayerState(
        weights=randn((g.out_channels, fan_in), rng, std=float(std), dtype=dtype),
        gamma=np.ones(g.out_channels, dtype=dtype),
        beta=np.zeros(g.out_channels, dtype=dtype),
        epsilon=epsilon,
    )


def gemm_columns(columns: Tensor, st: NcLayerState) -> Tensor:
    """
    Per-sample W @ columns[n]: N x I x K -> N x O x K.
    """
    if st.weights.shape[1] != columns.shape[1]:
        raise DimensionError(
            f"weights {tuple(st.weights.shape)} do not match patch matrices {tuple(columns.shape)}"
        )
    weights = st.weights
    return np.stack(map_samples(lambda n: matmul(weights, columns[n]), columns.shape[0]))


def affine(pre_affine: Tensor, st: NcLayerState) -> Tensor:
    result: Tensor = st.gamma[:, np.newaxis] * pre_affine + st.beta[:, np.newaxis]
    return result


def _forward(x: Tensor, st: NcLayerState, g: ConvGeometry, normalized: bool) -> Tensor:
    check_input(x, g)
    x = x.astype(st.weights.dtype, copy=False)
    columns = unfold_batch(x, g)
    xhat: Optional[Tensor] = None
    stats: Optional[PatchStats] = None
    source = columns
    if normalized:
        xhat, stats = standardize(columns, st.epsilon)
        source = xhat
    pre_affine = gemm_columns(source, st)
    st.cache = ConvCache(
        input_shape=tuple(x.shape),
        columns=columns,
        xhat=xhat,
        stats=stats,
        pre_affine=pre_affine,
    )
    h_out, w_out = g.output_size
    return affine(pre_affine, st).reshape(x.shape[0], g.out_channels, h_out, w_out)


def _backward(
        grad_y: Tensor,
        st: NcLayerState,
        g: ConvGeometry,
        normalized: bool,
) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    cache = st.cache
    if cache is None:
        raise StateError("backward called before forward")
    if normalized != (cache.xhat is not None):
        raise StateError("cache was produced by the other convolution kind")
    n = cache.input_shape[0]
    h_out, w_out = g.output_size
    expected = (n, g.out_channels, h_out, w_out)
    if tuple(grad_y.shape) != expected or cache.columns.shape[1:] != (g.patch_size, g.num_columns):
        raise StateError(f"stale cache: grad shape {tuple(grad_y.shape)}, cached forward expects {expected}")

    grad_out = grad_y.reshape(n, g.out_channels, g.num_columns).astype(st.weights.dtype, copy=False)
    grad_beta = grad_out.sum(axis=(0, 2))
    grad_gamma = (grad_out * cache.pre_affine).sum(axis=(0, 2))
    grad_pre = st.gamma[:, np.newaxis] * grad_out

    source = cache.xhat if cache.xhat is not None else cache.columns
    weights_t = st.weights.T
    per_sample_w = map_samples(lambda i: matmul(grad_pre[i], source[i].T), n)
    grad_weights = np.sum(np.stack(per_sample_w), axis=0)
    grad_source = np.stack(map_samples(lambda i: matmul(weights_t, grad_pre[i]), n))

    if cache.stats is not None:
        grad_columns = standardize_backward(grad_source, cache.columns, cache.stats)
    else:
        grad_columns = grad_source
    grad_x = fold_batch(grad_columns, g)
    return grad_x, grad_weights, grad_gamma, grad_beta


def nc_forward(x: Tensor, st: NcLayerState, g: ConvGeometry) -> Tensor:
    return _forward(x, st, g, normalized=True)


def nc_backward(grad_y: Tensor, st: NcLayerState, g: ConvGeometry) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    return _backward(grad_y, st, g, normalized=True)


def conv_forward(x: Tensor, st: NcLayerState, g: ConvGeometry) -> Tensor:
    return _forward(x, st, g, normalized=False)


def conv_backward(grad_y: Tensor, st: NcLayerState, g: ConvGeometry) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    return _backward(grad_y, st, g, normalized=False)


def naive_conv(x: Tensor, weights: Tensor, g: ConvGeometry) -> Tensor:
    """
    Direct loop convolution (cross-correlation, zero padding, no bias).
    Reference oracle for the im2col path.
    """
    check_input(x, g)
    n = x.shape[0]
    (kh, kw), (sh, sw), (ph, pw) = g.kernel, g.stride, g.padding
    h_out, w_out = g.output_size
    kernel = weights.reshape(g.out_channels, g.in_channels, kh, kw)
    padded = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode="constant")
    out = np.zeros((n, g.out_channels, h_out, w_out), dtype=np.result_type(x, weights))
    for b in range(n):
        for o in range(g.out_channels):
            for r in range(h_out):
                for s in range(w_out):
                    patch = padded[b, :, r * sh:r * sh + kh, s * sw:s * sw + kw]
                    out[b, o, r, s] = np.sum(patch * kernel[o])
    return out
