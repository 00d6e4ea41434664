"""
Finite-difference cases for every analytic backward in the package. All
cases run in float64. Layer cases check against L = sum(r * y) for a fixed random
r; model cases use the cross-entropy of random labels.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from ....core.gradcheck import numerical_gradient, relative_error
from ....core.nc_conv import conv_backward, conv_forward, init_layer_state, nc_backward, nc_forward
from ....core.norms import (
    activation_backward,
    activation_forward,
    groupnorm_backward,
    groupnorm_forward,
    init_groupnorm_state,
)
from ....core.tensor import Rng, Tensor, make_rng
from ....data_types import ActivationKind, ConvGeometry, LayerSpec, ModelSpec
from ....network.loss import cross_entropy
from ....network.model import build
from ....network.presets import conv_classifier

KERNELS = (1, 3)
STRIDES = (1, 2)
PADDINGS = (0, 1)
ACTIVATIONS: Tuple[ActivationKind, ...] = ("relu", "elu", "selu")


@dataclass
class CaseResult:
    name: str
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0


Case = Callable[[float], CaseResult]


def random_geometry(index: int, rng: Rng) -> ConvGeometry:
    kernel = KERNELS[index % 2]
    stride = STRIDES[(index // 2) % 2]
    padding = PADDINGS[(index // 4) % 2]
    size = int(rng.integers(kernel + 2, kernel + 5))
    return ConvGeometry(
        in_channels=int(rng.integers(2, 4)),
        out_channels=int(rng.integers(2, 4)),
        kernel=(kernel, kernel),
        stride=(stride, stride),
        padding=(padding, padding),
        input_size=(size, size + int(rng.integers(0, 2))),
    )


def conv_case(index: int, seed: int, normalized: bool, perturb: bool = False) -> Case:
    def run(step: float) -> CaseResult:
        rng = make_rng(seed, index)
        g = random_geometry(index, rng)
        st = init_layer_state(g, rng, np.float64, epsilon=1e-5, normalized=normalized)
        st.gamma[:] = rng.uniform(0.5, 1.5, g.out_channels)
        st.beta[:] = rng.normal(size=g.out_channels)
        x = rng.standard_normal((int(rng.integers(1, 3)), g.in_channels, *g.input_size))
        forward = nc_forward if normalized else conv_forward
        backward = nc_backward if normalized else conv_backward
        upstream = rng.standard_normal(forward(x, st, g).shape)

        grad_x, grad_w, grad_gamma, grad_beta = backward(upstream, st, g)
        if perturb:
            grad_w = grad_w * (1.0 + 1e-3)

        def loss() -> float:
            return float(np.sum(upstream * forward(x, st, g)))

        name = "nc" if normalized else "conv"
        return CaseResult(
            name=f"{name}[{index}] k={g.kernel[0]} s={g.stride[0]} p={g.padding[0]} "
                 f"C={g.in_channels} O={g.out_channels} HW={g.input_size}",
            errors={
                "x": relative_error(grad_x, numerical_gradient(loss, x, step)),
                "W": relative_error(grad_w, numerical_gradient(loss, st.weights, step)),
                "gamma": relative_error(grad_gamma, numerical_gradient(loss, st.gamma, step)),
                "beta": relative_error(grad_beta, numerical_gradient(loss, st.beta, step)),
            },
        )
    return run


def groupnorm_case(index: int, seed: int) -> Case:
    def run(step: float) -> CaseResult:
        rng = make_rng(seed, 1000 + index)
        channels = int(rng.choice([2, 4, 6]))
        divisors = [d for d in range(1, channels + 1) if channels % d == 0]
        groups = int(rng.choice(divisors))
        st = init_groupnorm_state(channels, groups, np.float64)
        st.gamma[:] = rng.uniform(0.5, 1.5, channels)
        st.beta[:] = rng.normal(size=channels)
        x = rng.standard_normal((int(rng.integers(1, 3)), channels, int(rng.integers(2, 4)), int(rng.integers(2, 4))))
        upstream = rng.standard_normal(x.shape)
        groupnorm_forward(x, st)
        grad_x, grad_gamma, grad_beta = groupnorm_backward(upstream, st)

        def loss() -> float:
            return float(np.sum(upstream * groupnorm_forward(x, st)))

        return CaseResult(
            name=f"groupnorm[{index}] C={channels} G={groups} shape={x.shape}",
            errors={
                "x": relative_error(grad_x, numerical_gradient(loss, x, step)),
                "gamma": relative_error(grad_gamma, numerical_gradient(loss, st.gamma, step)),
                "beta": relative_error(grad_beta, numerical_gradient(loss, st.beta, step)),
            },
        )
    return run


def away_from_kink(rng: Rng, shape: Tuple[int, ...], margin: float = 1e-4) -> Tensor:
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 0.5 * margin) * (margin + np.abs(x)), x)


def activation_case(kind: ActivationKind, index: int, seed: int) -> Case:
    def run(step: float) -> CaseResult:
        rng = make_rng(seed, 2000 + index)
        x = away_from_kink(rng, (3, 7))
        upstream = rng.standard_normal(x.shape)
        analytic = activation_backward(kind, upstream, x)

        def loss() -> float:
            return float(np.sum(upstream * activation_forward(kind, x)))

        return CaseResult(name=f"{kind}", errors={"x": relative_error(analytic, numerical_gradient(loss, x, step))})
    return run


def cross_entropy_case(seed: int) -> Case:
    def run(step: float) -> CaseResult:
        rng = make_rng(seed, 3000)
        logits = 3.0 * rng.standard_normal((4, 10))
        labels = rng.integers(0, 10, 4)
        _, analytic = cross_entropy(logits, labels)

        def loss() -> float:
            return cross_entropy(logits, labels)[0]

        return CaseResult(name="cross_entropy", errors={"logits": relative_error(analytic, numerical_gradient(loss, logits, step))})
    return run


def model_spec(index: int) -> ModelSpec:
    if index % 2 == 0:
        return conv_classifier("nc", "relu", num_classes=3, width=3, kernel=3, input_shape=(2, 4, 4))
    return ModelSpec(
        name="nc-gn-block",
        layers=[
            LayerSpec(kind="conv", out_channels=4, kernel=3, stride=1, padding=1, conv="nc"),
            LayerSpec(kind="gn", num_groups=2),
            LayerSpec(kind="act", activation="elu"),
            LayerSpec(kind="block", out_channels=4, stride=2, conv="nc", norm="gn", num_groups=2, activation="selu"),
            LayerSpec(kind="gap"),
            LayerSpec(kind="linear", out_features=3),
        ],
        input_shape=(2, 4, 4),
    )


def model_case(index: int, seed: int) -> Case:
    def run(step: float) -> CaseResult:
        rng = make_rng(seed, 4000, index)
        spec = model_spec(index)
        model = build(spec, rng, np.float64)
        for name, value in model.params().items():
            if name.endswith("gamma") or name.endswith("bias") or name.endswith("beta"):
                value[:] = rng.uniform(0.5, 1.5, value.shape)
        x = rng.standard_normal((2, *spec.input_shape))
        labels = rng.integers(0, 3, 2)
        _, grad_logits = cross_entropy(model.forward(x), labels)
        model.backward(grad_logits)
        analytic = {name: g.copy() for name, g in model.grads().items()}

        def loss() -> float:
            return cross_entropy(model.forward(x), labels)[0]

        errors = {
            name: relative_error(analytic[name], numerical_gradient(loss, value, step))
            for name, value in model.params().items()
        }
        return CaseResult(name=f"model[{index}] {spec.name}", errors=errors)
    return run


def all_cases(count: int, seed: int, perturb: bool = False) -> List[Case]:
    cases: List[Case] = []
    cases += [conv_case(i, seed, normalized=True, perturb=perturb) for i in range(count)]
    cases += [conv_case(i, seed, normalized=False) for i in range(count)]
    cases += [groupnorm_case(i, seed) for i in range(count)]
    cases += [activation_case(kind, i, seed) for i, kind in enumerate(ACTIVATIONS)]
    cases.append(cross_entropy_case(seed))
    cases += [model_case(i, seed) for i in range(count)]
    return cases
