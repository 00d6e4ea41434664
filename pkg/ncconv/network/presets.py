"""
Desk-scale architectures. In NC models no normalization layer follows the
convolutions; in GN models a GroupNorm follows every 3x3 convolution and
every projection shortcut.
"""
from typing import List, Sequence, Tuple

from ..data_types import ActivationKind, ConvKind, LayerSpec, ModelSection, ModelSpec, NormKind, ShortcutKind
from ..errors import ConfigError


def _stem(conv: ConvKind, norm: NormKind, activation: ActivationKind, width: int, num_groups: int) -> List[LayerSpec]:
    layers = [LayerSpec(kind="conv", out_channels=width, kernel=3, stride=1, padding=1, conv=conv)]
    if norm == "gn":
        layers.append(LayerSpec(kind="gn", num_groups=num_groups))
    layers.append(LayerSpec(kind="act", activation=activation))
    return layers


def resnet8(
        conv: ConvKind = "nc",
        norm: NormKind = "none",
        activation: ActivationKind = "relu",
        num_classes: int = 10,
        widths: Sequence[int] = (16, 32, 64),
        input_shape: Tuple[int, int, int] = (3, 32, 32),
        num_groups: int = 0,
        shortcut: ShortcutKind = "standard",
) -> ModelSpec:
    """
    Stem conv, three stages of one basic block each (stride 1, 2, 2),
    global average pooling and a linear classifier.
    """
    layers = _stem(conv, norm, activation, widths[0], num_groups)
    for stage, width in enumerate(widths):
        layers.append(LayerSpec(
            kind="block",
            out_channels=width,
            stride=1 if stage == 0 else 2,
            conv=conv,
            norm=norm,
            activation=activation,
            num_groups=num_groups,
            shortcut=shortcut,
        ))
    layers += [
        LayerSpec(kind="gap"),
        LayerSpec(kind="linear", out_features=num_classes),
    ]
    return ModelSpec(name=f"resnet8-{conv}-{norm}", layers=layers, input_shape=input_shape)


def plain_cnn(
        conv: ConvKind = "nc",
        norm: NormKind = "none",
        activation: ActivationKind = "relu",
        num_classes: int = 10,
        widths: Sequence[int] = (16, 32, 32, 64),
        input_shape: Tuple[int, int, int] = (3, 32, 32),
        num_groups: int = 0,
) -> ModelSpec:
    """Four 3x3 convolutions, stride 2 on the second and fourth."""
    layers: List[LayerSpec] = []
    for index, width in enumerate(widths):
        layers.append(LayerSpec(
            kind="conv", out_channels=width, kernel=3, stride=2 if index % 2 else 1, padding=1, conv=conv,
        ))
        if norm == "gn":
            layers.append(LayerSpec(kind="gn", num_groups=num_groups))
        layers.append(LayerSpec(kind="act", activation=activation))
    layers += [
        LayerSpec(kind="gap"),
        LayerSpec(kind="linear", out_features=num_classes),
    ]
    return ModelSpec(name=f"plain4-{conv}-{norm}", layers=layers, input_shape=input_shape)


def conv_classifier(
        conv: ConvKind = "nc",
        activation: ActivationKind = "relu",
        num_classes: int = 10,
        width: int = 8,
        kernel: int = 3,
        input_shape: Tuple[int, int, int] = (3, 8, 8),
) -> ModelSpec:
    """One convolution, an activation and a linear layer over the flattened map."""
    return ModelSpec(
        name=f"conv-linear-{conv}",
        layers=[
            LayerSpec(kind="conv", out_channels=width, kernel=kernel, stride=1, padding=0, conv=conv),
            LayerSpec(kind="act", activation=activation),
            LayerSpec(kind="flatten"),
            LayerSpec(kind="linear", out_features=num_classes),
        ],
        input_shape=input_shape,
    )


def spec_from_section(section: ModelSection, input_shape: Tuple[int, int, int]) -> ModelSpec:
    if section.name == "resnet8":
        if len(section.widths) != 3:
            raise ConfigError(f"resnet8 takes 3 stage widths, got {section.widths}")
        return resnet8(section.conv, section.norm, section.activation, section.num_classes,
                       section.widths, input_shape, section.num_groups, section.shortcut)
    if section.name == "plain4":
        if len(section.widths) != 4:
            raise ConfigError(f"plain4 takes 4 widths, got {section.widths}")
        return plain_cnn(section.conv, section.norm, section.activation, section.num_classes,
                         section.widths, input_shape, section.num_groups)
    if section.name == "conv-linear":
        return conv_classifier(section.conv, section.activation, section.num_classes,
                               section.widths[0], 3, input_shape)
    raise ConfigError(f"unknown model {section.name!r}, expected resnet8, plain4 or conv-linear")
