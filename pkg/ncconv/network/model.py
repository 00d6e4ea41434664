import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from .layers import (
    ActivationLayer,
    AvgPool2,
    ConvLayer,
    Flatten,
    GlobalAvgPool,
    GroupNormLayer,
    Layer,
    Linear,
    ResidualBlock,
    Sequence,
    conv_layers,
    group_norm_layers,
)
from ..core.norms import init_groupnorm_state
from ..core.tensor import Rng, Tensor
from ..data_types import ConvGeometry, LayerSpec, ModelSpec
from ..errors import NcConvError, ShapeError

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


class Model:
    def __init__(self, spec: ModelSpec, body: Sequence, dtype: "np.dtype[Any]", output_shape: Shape):
        self.spec = spec
        self.output_shape = output_shape
        self.body = body
        self.dtype = dtype

    def forward(self, x: Tensor) -> Tensor:
        return self.body.forward(x.astype(self.dtype, copy=False))

    def backward(self, grad_y: Tensor) -> Tensor:
        return self.body.backward(grad_y.astype(self.dtype, copy=False))

    def params(self) -> Dict[str, Tensor]:
        return self.body.params()

    def grads(self) -> Dict[str, Tensor]:
        return self.body.grads()

    def parameter_count(self) -> int:
        return sum(int(p.size) for p in self.params().values())

    def conv_layers(self) -> List[ConvLayer]:
        return conv_layers(self.body)

    def group_counts(self) -> List[int]:
        """Resolved group count of every GroupNorm layer, in forward order."""
        return [norm.state.num_groups for norm in group_norm_layers(self.body)]


def _conv(
        in_shape: Shape,
        out_channels: int,
        kernel: int,
        stride: int,
        padding: int,
        normalized: bool,
        rng: Rng,
        dtype: "npt.DTypeLike",
        epsilon: float,
) -> Tuple[ConvLayer, Shape]:
    if len(in_shape) != 3:
        raise NcConvError(f"convolution needs a C x H x W input, got {in_shape}")
    g = ConvGeometry(
        in_channels=in_shape[0],
        out_channels=out_channels,
        kernel=(kernel, kernel),
        stride=(stride, stride),
        padding=(padding, padding),
        input_size=(in_shape[1], in_shape[2]),
    )
    g.validate()
    return ConvLayer(g, rng, normalized, dtype, epsilon), (out_channels, *g.output_size)


def _build_layer(
        spec: LayerSpec,
        in_shape: Shape,
        rng: Rng,
        dtype: "npt.DTypeLike",
        epsilon: float,
) -> Tuple[Layer, Shape]:
    kind = spec.kind
    if kind == "conv":
        return _conv(in_shape, spec.out_channels, spec.kernel, spec.stride, spec.padding,
                     spec.conv == "nc", rng, dtype, epsilon)
    if kind == "gn":
        if len(in_shape) != 3:
            raise NcConvError(f"groupnorm needs a C x H x W input, got {in_shape}")
        return GroupNormLayer(init_groupnorm_state(in_shape[0], spec.num_groups, dtype, epsilon)), in_shape
    if kind == "act":
        return ActivationLayer(spec.activation), in_shape
    if kind == "avgpool":
        if len(in_shape) != 3 or in_shape[1] % 2 or in_shape[2] % 2:
            raise NcConvError(f"2x2 pooling needs even spatial extents, got {in_shape}")
        return AvgPool2(), (in_shape[0], in_shape[1] // 2, in_shape[2] // 2)
    if kind == "gap":
        if len(in_shape) != 3:
            raise NcConvError(f"global pooling needs a C x H x W input, got {in_shape}")
        return GlobalAvgPool(), (in_shape[0],)
    if kind == "flatten":
        return Flatten(), (int(np.prod(in_shape)),)
    if kind == "linear":
        if len(in_shape) != 1:
            raise NcConvError(f"linear needs a flat input, got {in_shape}")
        return Linear(in_shape[0], spec.out_features, rng, dtype), (spec.out_features,)
    if kind == "block":
        return _build_block(spec, in_shape, rng, dtype, epsilon)
    raise NcConvError(f"unknown layer kind {kind!r}")


def _build_block(
        spec: LayerSpec,
        in_shape: Shape,
        rng: Rng,
        dtype: "npt.DTypeLike",
        epsilon: float,
) -> Tuple[Layer, Shape]:
    normalized = spec.conv == "nc"
    main: List[Layer] = []
    conv1, shape = _conv(in_shape, spec.out_channels, 3, spec.stride, 1, normalized, rng, dtype, epsilon)
    main.append(conv1)
    if spec.norm == "gn":
        main.append(GroupNormLayer(init_groupnorm_state(shape[0], spec.num_groups, dtype, epsilon)))
    main.append(ActivationLayer(spec.activation))
    conv2, shape = _conv(shape, spec.out_channels, 3, 1, 1, normalized, rng, dtype, epsilon)
    main.append(conv2)
    if spec.norm == "gn":
        main.append(GroupNormLayer(init_groupnorm_state(shape[0], spec.num_groups, dtype, epsilon)))

    shortcut: Optional[Layer] = None
    if spec.stride != 1 or in_shape[0] != spec.out_channels:
        projection, short_shape = _conv(in_shape, spec.out_channels, 1, spec.stride, 0,
                                        spec.shortcut == "nc", rng, dtype, epsilon)
        shortcut = projection
        if spec.norm == "gn":
            shortcut = Sequence([
                projection,
                GroupNormLayer(init_groupnorm_state(short_shape[0], spec.num_groups, dtype, epsilon)),
            ])
        if short_shape != shape:
            raise NcConvError(f"residual branches disagree: {shape} vs shortcut {short_shape}")
    elif shape != in_shape:
        raise NcConvError(f"residual branches disagree: {shape} vs identity {in_shape}")
    return ResidualBlock(Sequence(main), shortcut, spec.activation), shape


def build(
        spec: ModelSpec,
        rng: Rng,
        dtype: "npt.DTypeLike" = np.float32,
        epsilon: float = 1e-5,
) -> Model:
    shape: Shape = tuple(spec.input_shape)
    layers: List[Layer] = []
    for index, layer_spec in enumerate(spec.layers):
        try:
            layer, shape = _build_layer(layer_spec, shape, rng, dtype, epsilon)
        except ShapeError:
            raise
        except NcConvError as e:
            raise ShapeError(str(e), layer_index=index) from e
        layers.append(layer)

    model = Model(spec, Sequence(layers), np.dtype(dtype), shape)
    if model.group_counts():
        logger.info("%s group counts: %s", spec.name, model.group_counts())
    logger.info("built %s: %d layers, %d parameters, output %s",
                spec.name, len(layers), model.parameter_count(), shape)
    return model

