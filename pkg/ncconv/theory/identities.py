"""
Per-column gradient-norm identities of patch standardization.

Standardization is split into centering (x -> xdot = x - mean(x)) and
scaling (xdot -> xhat = xdot / sigma, sigma = sqrt(<xdot, xdot> / I), no eps).
For each step the input gradient is obtained from the explicit Jacobian of
the map and compared with the closed form:

    centering: |grad_x L|^2    = |grad_xdot L|^2 - (1/I) <1, grad_xdot L>^2
    scaling:   |grad_xdot L|^2 = (1/sigma^2) (|grad_xhat L|^2
                                 + (1/I^2) <xhat, grad_xhat L>^2 (<xhat, xhat> - 2I))

The scaling form carries 1/sigma^2; the variant with a 1/sigma factor is
evaluated alongside and reported as `printed_form_gap`.

Gaps are relative to the norm of the gradient entering the step
(|g|^2, and |g|^2 / sigma^2 for scaling), which stays meaningful when the
reduction cancels the left-hand side to zero.
"""
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np

from ..core.tensor import Tensor, make_rng
from ..data_types import IdentityReport
from ..errors import NcConvError

DEGENERATE_SIGMA = 1e-12


@dataclass
class ColumnInstance:
    """
    A raw column plus a quadratic downstream loss L(v) = <a, v> + 0.5 <v, B v>
    applied after the step under test.
    """
    column: Tensor
    linear: Tensor
    quadratic: Tensor
    seed: int

    @property
    def size(self) -> int:
        return int(self.column.shape[0])

    def loss_gradient(self, v: Tensor) -> Tensor:
        result: Tensor = self.linear + self.quadratic @ v
        return result


def random_instance(size: int, seed: int) -> ColumnInstance:
    rng = make_rng(seed)
    scale = np.exp(rng.uniform(-2.0, 2.0))
    column = scale * rng.standard_normal(size) + rng.normal()
    sym = rng.standard_normal((size, size))
    return ColumnInstance(
        column=column,
        linear=rng.standard_normal(size),
        quadratic=0.5 * (sym + sym.T),
        seed=seed,
    )


def random_instances(count: int, sizes: Sequence[int], seed: int = 0) -> Iterator[ColumnInstance]:
    for index in range(count):
        yield random_instance(sizes[index % len(sizes)], seed * 100003 + index)


def _gap(lhs: float, rhs: float, scale: float) -> float:
    if lhs == rhs:
        return 0.0
    return abs(lhs - rhs) / max(scale, np.finfo(np.float64).tiny)


def centering_jacobian(size: int) -> Tensor:
    return np.eye(size) - np.full((size, size), 1.0 / size)


def scaling_jacobian(xdot: Tensor) -> Tensor:
    size = xdot.shape[0]
    sigma = np.sqrt(xdot @ xdot / size)
    xhat = xdot / sigma
    result: Tensor = (np.eye(size) - np.outer(xhat, xhat) / size) / sigma
    return result


def check_centering(
        grad_centered: Tensor,
        tolerance: float = 1e-10,
        instance: Optional[Dict[str, Any]] = None,
) -> IdentityReport:
    size = grad_centered.shape[0]
    grad_x = centering_jacobian(size).T @ grad_centered
    lhs = float(grad_x @ grad_x)
    norm_sq = float(grad_centered @ grad_centered)
    rhs = norm_sq - float(np.sum(grad_centered)) ** 2 / size
    gap = _gap(lhs, rhs, norm_sq)
    return IdentityReport(
        name="centering",
        lhs=lhs,
        rhs=rhs,
        relative_gap=gap,
        tolerance=tolerance,
        passed=gap <= tolerance,
        instance={"I": size, **(instance or {})},
        extras={
            "grad_centered_norm_sq": norm_sq,
            "norm_not_increased": float(lhs <= norm_sq * (1 + tolerance)),
        },
    )


def verify_centering_identity(instance: ColumnInstance, tolerance: float = 1e-10) -> IdentityReport:
    xdot = instance.column - instance.column.mean()
    return check_centering(instance.loss_gradient(xdot), tolerance, {"seed": instance.seed})


def check_scaling(
        xdot: Tensor,
        grad_xhat: Tensor,
        tolerance: float = 1e-10,
        instance: Optional[Dict[str, Any]] = None,
) -> IdentityReport:
    size = xdot.shape[0]
    sigma = float(np.sqrt(xdot @ xdot / size))
    if sigma < DEGENERATE_SIGMA:
        raise NcConvError(f"degenerate column: sigma {sigma:.3g} < {DEGENERATE_SIGMA}")
    xhat = xdot / sigma
    grad_xdot = scaling_jacobian(xdot).T @ grad_xhat
    lhs = float(grad_xdot @ grad_xdot)

    norm_sq = float(grad_xhat @ grad_xhat)
    projection = float(xhat @ grad_xhat)
    xhat_norm_sq = float(xhat @ xhat)
    bracket = norm_sq + projection ** 2 * (xhat_norm_sq - 2 * size) / size ** 2
    rhs = bracket / sigma ** 2
    printed = bracket / sigma
    scale = norm_sq / sigma ** 2
    gap = _gap(lhs, rhs, scale)
    return IdentityReport(
        name="scaling",
        lhs=lhs,
        rhs=rhs,
        relative_gap=gap,
        tolerance=tolerance,
        passed=gap <= tolerance and abs(xhat_norm_sq - size) <= 1e-9 * size,
        instance={"I": size, "sigma": sigma, **(instance or {})},
        extras={
            "printed_form_rhs": printed,
            "printed_form_gap": _gap(lhs, printed, scale),
            "xhat_norm_sq": xhat_norm_sq,
            "reduction_term": -projection ** 2 / size,
        },
    )


def verify_scaling_identity(instance: ColumnInstance, tolerance: float = 1e-10) -> IdentityReport:
    xdot = instance.column - instance.column.mean()
    sigma = np.sqrt(xdot @ xdot / instance.size)
    return check_scaling(xdot, instance.loss_gradient(xdot / sigma), tolerance, {"seed": instance.seed})


def run_identity_suite(
        count: int,
        sizes: Sequence[int],
        seed: int = 0,
        tolerance: float = 1e-10,
) -> List[IdentityReport]:
    """
    `count` centering and `count` scaling checks, in instance order.
    """
    reports = []
    for instance in random_instances(count, sizes, seed):
        reports.append(verify_centering_identity(instance, tolerance))
        reports.append(verify_scaling_identity(instance, tolerance))
    return reports
