"""
Layers with explicit forward/backward. Each layer keeps whatever its backward
needs from the most recent forward call.
"""
from typing import Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from ..core.nc_conv import conv_backward, conv_forward, init_layer_state, nc_backward, nc_forward
from ..core.norms import activation_backward, activation_forward, groupnorm_backward, groupnorm_forward
from ..core.tensor import Rng, Tensor, randn
from ..data_types import ActivationKind, ConvGeometry, GroupNormState, NcLayerState
from ..errors import StateError


class Layer:
    name = "layer"

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def backward(self, grad_y: Tensor) -> Tensor:
        raise NotImplementedError

    def params(self) -> Dict[str, Tensor]:
        return {}

    def grads(self) -> Dict[str, Tensor]:
        return {}


class ConvLayer(Layer):
    def __init__(
            self,
            geometry: ConvGeometry,
            rng: Rng,
            normalized: bool,
            dtype: "npt.DTypeLike" = np.float32,
            epsilon: float = 1e-5,
            state: Optional[NcLayerState] = None,
    ):
        self.geometry = geometry
        self.normalized = normalized
        self.name = "nc_conv" if normalized else "conv"
        self.state = state or init_layer_state(geometry, rng, dtype, epsilon, normalized=normalized)
        self._grads: Dict[str, Tensor] = {}
        self.input_grad_norm = 0.0

    def forward(self, x: Tensor) -> Tensor:
        if self.normalized:
            return nc_forward(x, self.state, self.geometry)
        return conv_forward(x, self.state, self.geometry)

    def backward(self, grad_y: Tensor) -> Tensor:
        step = nc_backward if self.normalized else conv_backward
        grad_x, grad_w, grad_gamma, grad_beta = step(grad_y, self.state, self.geometry)
        self._grads = {"weights": grad_w, "gamma": grad_gamma, "beta": grad_beta}
        self.input_grad_norm = float(np.linalg.norm(grad_x))
        return grad_x

    def params(self) -> Dict[str, Tensor]:
        return {"weights": self.state.weights, "gamma": self.state.gamma, "beta": self.state.beta}

    def grads(self) -> Dict[str, Tensor]:
        return self._grads


class GroupNormLayer(Layer):
    name = "groupnorm"

    def __init__(self, state: GroupNormState):
        self.state = state
        self._grads: Dict[str, Tensor] = {}

    def forward(self, x: Tensor) -> Tensor:
        return groupnorm_forward(x, self.state)

    def backward(self, grad_y: Tensor) -> Tensor:
        grad_x, grad_gamma, grad_beta = groupnorm_backward(grad_y, self.state)
        self._grads = {"gamma": grad_gamma, "beta": grad_beta}
        return grad_x

    def params(self) -> Dict[str, Tensor]:
        return {"gamma": self.state.gamma, "beta": self.state.beta}

    def grads(self) -> Dict[str, Tensor]:
        return self._grads


class ActivationLayer(Layer):
    def __init__(self, kind: ActivationKind):
        self.kind = kind
        self.name = kind
        self._x: Optional[Tensor] = None

    def forward(self, x: Tensor) -> Tensor:
        self._x = x
        return activation_forward(self.kind, x)

    def backward(self, grad_y: Tensor) -> Tensor:
        if self._x is None:
            raise StateError(f"{self.kind} backward called before forward")
        return activation_backward(self.kind, grad_y, self._x)


class AvgPool2(Layer):
    """2x2 average pooling, stride 2, even spatial extents."""
    name = "avgpool"

    def forward(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        result: Tensor = x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
        return result

    def backward(self, grad_y: Tensor) -> Tensor:
        spread = np.repeat(np.repeat(grad_y, 2, axis=2), 2, axis=3)
        result: Tensor = spread * 0.25
        return result


class GlobalAvgPool(Layer):
    name = "gap"

    def __init__(self) -> None:
        self._shape: Tuple[int, ...] = ()

    def forward(self, x: Tensor) -> Tensor:
        self._shape = x.shape
        result: Tensor = x.mean(axis=(2, 3))
        return result

    def backward(self, grad_y: Tensor) -> Tensor:
        n, c, h, w = self._shape
        return np.broadcast_to(grad_y[:, :, None, None] / (h * w), (n, c, h, w)).copy()


class Flatten(Layer):
    name = "flatten"

    def __init__(self) -> None:
        self._shape: Tuple[int, ...] = ()

    def forward(self, x: Tensor) -> Tensor:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_y: Tensor) -> Tensor:
        return grad_y.reshape(self._shape)


class Linear(Layer):
    name = "linear"

    def __init__(self, in_features: int, out_features: int, rng: Rng, dtype: "npt.DTypeLike" = np.float32):
        std = 1.0 / np.sqrt(in_features)
        self.weights = randn((out_features, in_features), rng, std=float(std), dtype=dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self._x: Optional[Tensor] = None
        self._grads: Dict[str, Tensor] = {}

    def forward(self, x: Tensor) -> Tensor:
        self._x = x.astype(self.weights.dtype, copy=False)
        result: Tensor = self._x @ self.weights.T + self.bias
        return result

    def backward(self, grad_y: Tensor) -> Tensor:
        if self._x is None:
            raise StateError("linear backward called before forward")
        self._grads = {"weights": grad_y.T @ self._x, "bias": grad_y.sum(axis=0)}
        result: Tensor = grad_y @ self.weights
        return result

    def params(self) -> Dict[str, Tensor]:
        return {"weights": self.weights, "bias": self.bias}

    def grads(self) -> Dict[str, Tensor]:
        return self._grads


class Sequence(Layer):
    name = "sequence"

    def __init__(self, layers: List[Layer]):
        self.layers = layers

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_y: Tensor) -> Tensor:
        for layer in reversed(self.layers):
            grad_y = layer.backward(grad_y)
        return grad_y

    def params(self) -> Dict[str, Tensor]:
        return {
            f"{i}.{name}": value
            for i, layer in enumerate(self.layers)
            for name, value in layer.params().items()
        }

    def grads(self) -> Dict[str, Tensor]:
        return {
            f"{i}.{name}": value
            for i, layer in enumerate(self.layers)
            for name, value in layer.grads().items()
        }


class ResidualBlock(Layer):
    """
    act(main(x) + shortcut(x)); shortcut is identity or a 1x1 projection conv,
    followed by GroupNorm in GN models.
    """
    name = "block"

    def __init__(self, main: Sequence, shortcut: Optional[Layer], activation: ActivationKind):
        self.main = main
        self.shortcut = shortcut
        self.out_act = ActivationLayer(activation)

    def forward(self, x: Tensor) -> Tensor:
        residual = self.shortcut.forward(x) if self.shortcut is not None else x
        return self.out_act.forward(self.main.forward(x) + residual)

    def backward(self, grad_y: Tensor) -> Tensor:
        grad_sum = self.out_act.backward(grad_y)
        grad_x = self.main.backward(grad_sum)
        if self.shortcut is not None:
            return grad_x + self.shortcut.backward(grad_sum)
        return grad_x + grad_sum

    def params(self) -> Dict[str, Tensor]:
        found = {f"main.{k}": v for k, v in self.main.params().items()}
        if self.shortcut is not None:
            found.update({f"shortcut.{k}": v for k, v in self.shortcut.params().items()})
        return found

    def grads(self) -> Dict[str, Tensor]:
        found = {f"main.{k}": v for k, v in self.main.grads().items()}
        if self.shortcut is not None:
            found.update({f"shortcut.{k}": v for k, v in self.shortcut.grads().items()})
        return found


def conv_layers(layer: Layer) -> List[ConvLayer]:
    """All conv layers reachable from `layer`, in forward order."""
    if isinstance(layer, ConvLayer):
        return [layer]
    if isinstance(layer, Sequence):
        return [conv for child in layer.layers for conv in conv_layers(child)]
    if isinstance(layer, ResidualBlock):
        found = conv_layers(layer.main)
        if layer.shortcut is not None:
            found += conv_layers(layer.shortcut)
        return found
    return []


def group_norm_layers(layer: Layer) -> List[GroupNormLayer]:
    """All GroupNorm layers reachable from `layer`, in forward order."""
    if isinstance(layer, GroupNormLayer):
        return [layer]
    if isinstance(layer, Sequence):
        return [norm for child in layer.layers for norm in group_norm_layers(child)]
    if isinstance(layer, ResidualBlock):
        found = group_norm_layers(layer.main)
        if layer.shortcut is not None:
            found += group_norm_layers(layer.shortcut)
        return found
    return []
