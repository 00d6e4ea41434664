"""
Central finite differences for validating analytic gradients.
"""
from typing import Callable

import numpy as np

from .tensor import Tensor


def numerical_gradient(f: Callable[[], float], x: Tensor, step: float = 1e-5) -> Tensor:
    """
    d f / d x by central differences. `x` is perturbed in place and restored;
    `f` must read it on every call.
    """
    if not x.flags.c_contiguous:
        raise ValueError("numerical_gradient needs a contiguous array to perturb in place")
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        f_plus = f()
        flat[i] = original - step
        f_minus = f()
        flat[i] = original
        out[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(analytic: Tensor, numeric: Tensor, floor: float = 1e-12) -> float:
    """
    ||a - n|| / max(||a|| + ||n||, floor); 0 when both vanish.
    """
    diff = float(np.linalg.norm(np.asarray(analytic, dtype=np.float64) - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    if diff == 0.0:
        return 0.0
    return diff / max(scale, floor)
