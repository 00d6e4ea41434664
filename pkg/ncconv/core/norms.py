"""
Baseline layers: GroupNorm (LayerNorm is G=1, InstanceNorm is G=C) and the
ReLU / ELU / SELU activations.
"""
from typing import Tuple

import numpy as np
import numpy.typing as npt

from .tensor import Tensor
from ..data_types import ActivationKind, GroupNormCache, GroupNormState
from ..errors import ConfigError, StateError

# self-normalizing constants, 16+ significant digits
SELU_ALPHA = 1.6732632423543772848170429916717
SELU_SCALE = 1.0507009873554804934193349852946
ELU_ALPHA = 1.0


DEFAULT_GROUPS = 0
GROUP_PER_CHANNEL = -1


def default_num_groups(channels: int, preferred: int = 32) -> int:
    """
    `preferred` when it divides `channels`, else the largest divisor <= preferred.
    """
    for groups in range(min(preferred, channels), 0, -1):
        if channels % groups == 0:
            return groups
    return 1


def resolve_num_groups(channels: int, num_groups: int = DEFAULT_GROUPS) -> int:
    """
    Group count for a layer of `channels` channels. DEFAULT_GROUPS applies the
    default rule, GROUP_PER_CHANNEL gives InstanceNorm and 1 gives LayerNorm.
    """
    if num_groups == DEFAULT_GROUPS:
        return default_num_groups(channels)
    if num_groups == GROUP_PER_CHANNEL:
        return channels
    return num_groups


def init_groupnorm_state(
        channels: int,
        num_groups: int = DEFAULT_GROUPS,
        dtype: "npt.DTypeLike" = np.float64,
        epsilon: float = 1e-5,
) -> GroupNormState:
    groups = resolve_num_groups(channels, num_groups)
    if groups < 1 or channels % groups != 0:
        raise ConfigError(f"{channels} channels are not divisible into {groups} groups")
    return GroupNormState(
        num_groups=groups,
        gamma=np.ones(channels, dtype=dtype),
        beta=np.zeros(channels, dtype=dtype),
        epsilon=epsilon,
    )


def groupnorm_forward(x: Tensor, st: GroupNormState) -> Tensor:
    n, c, h, w = x.shape
    if c % st.num_groups != 0 or st.gamma.shape[0] != c:
        raise ConfigError(f"{c} channels are not divisible into {st.num_groups} groups")
    grouped = x.astype(st.gamma.dtype, copy=False).reshape(n, st.num_groups, -1)
    mean = grouped.mean(axis=-1, keepdims=True)
    centered = grouped - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + st.epsilon)
    xhat = centered * inv_std
    st.cache = GroupNormCache(xhat=xhat, inv_std=inv_std)
    out: Tensor = xhat.reshape(n, c, h, w) * st.gamma[:, None, None] + st.beta[:, None, None]
    return out


def groupnorm_backward(grad_y: Tensor, st: GroupNormState) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Returns (grad_x, grad_gamma, grad_beta).
    """
    cache = st.cache
    if cache is None:
        raise StateError("groupnorm backward called before forward")
    n, c, h, w = grad_y.shape
    if cache.xhat.size != grad_y.size:
        raise StateError(f"stale groupnorm cache for grad shape {tuple(grad_y.shape)}")
    xhat = cache.xhat.reshape(n, c, h, w)
    grad_beta = grad_y.sum(axis=(0, 2, 3))
    grad_gamma = (grad_y * xhat).sum(axis=(0, 2, 3))

    grad_xhat = (grad_y * st.gamma[:, None, None]).reshape(n, st.num_groups, -1)
    count = grad_xhat.shape[-1]
    grad_x = (cache.inv_std / count) * (
        count * grad_xhat
        - grad_xhat.sum(axis=-1, keepdims=True)
        - cache.xhat * (grad_xhat * cache.xhat).sum(axis=-1, keepdims=True)
    )
    return grad_x.reshape(n, c, h, w), grad_gamma, grad_beta


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0)


def relu_backward(grad_y: Tensor, x: Tensor) -> Tensor:
    result: Tensor = grad_y * (x > 0)
    return result


def elu(x: Tensor, alpha: float = ELU_ALPHA) -> Tensor:
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0)))


def elu_backward(grad_y: Tensor, x: Tensor, alpha: float = ELU_ALPHA) -> Tensor:
    result: Tensor = grad_y * np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0)))
    return result


def selu(x: Tensor) -> Tensor:
    return SELU_SCALE * elu(x, SELU_ALPHA)


def selu_backward(grad_y: Tensor, x: Tensor) -> Tensor:
    return SELU_SCALE * elu_backward(grad_y, x, SELU_ALPHA)


def activation_forward(kind: ActivationKind, x: Tensor) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "elu":
        return elu(x)
    if kind == "selu":
        return selu(x)
    return x


def activation_backward(kind: ActivationKind, grad_y: Tensor, x: Tensor) -> Tensor:
    """
    `x` is the forward input kept by the caller.
    """
    if kind == "relu":
        return relu_backward(grad_y, x)
    if kind == "elu":
        return elu_backward(grad_y, x)
    if kind == "selu":
        return selu_backward(grad_y, x)
    return grad_y
