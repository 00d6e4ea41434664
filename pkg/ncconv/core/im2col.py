"""
im2col lowering and its adjoint.

Patch element order is channel-major: index i = (c * kh + r) * kw + s for
channel c, kernel row r, kernel column s. Columns are output positions in
row-major order. Weight rows are flattened the same way (W.reshape(O, -1) of
an O x C x kh x kw kernel).
"""
from typing import List

import numpy as np

from .tensor import Tensor
from ..data_types import ConvGeometry, Im2ColMatrix
from ..errors import DimensionError


def check_input(x: Tensor, g: ConvGeometry) -> None:
    g.validate()
    expected = (g.in_channels, *g.input_size)
    if x.ndim != 4 or tuple(x.shape[1:]) != expected:
        raise DimensionError(f"input shape {tuple(x.shape)} does not match geometry N x {expected}")


def unfold_batch(x: Tensor, g: ConvGeometry) -> Tensor:
    """
    N x C x H x W -> N x I x K, zero padded.
    """
    check_input(x, g)
    n = x.shape[0]
    (kh, kw), (sh, sw), (ph, pw) = g.kernel, g.stride, g.padding
    h_out, w_out = g.output_size

    padded = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode="constant")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(2, 3))
    windows = windows[:, :, :(h_out - 1) * sh + 1:sh, :(w_out - 1) * sw + 1:sw]
    # N, C, h_out, w_out, kh, kw -> N, C, kh, kw, h_out, w_out
    columns = windows.transpose(0, 1, 4, 5, 2, 3)
    return np.ascontiguousarray(columns.reshape(n, g.patch_size, g.num_columns))


def fold_batch(columns: Tensor, g: ConvGeometry) -> Tensor:
    """
    N x I x K -> N x C x H x W. Overlapping contributions are summed and the
    padding border is dropped.
    """
    g.validate()
    if columns.ndim != 3 or columns.shape[1:] != (g.patch_size, g.num_columns):
        raise DimensionError(
            f"patch matrix shape {tuple(columns.shape)} does not match geometry "
            f"N x {(g.patch_size, g.num_columns)}"
        )
    n = columns.shape[0]
    (kh, kw), (sh, sw), (ph, pw) = g.kernel, g.stride, g.padding
    h, w = g.input_size
    h_out, w_out = g.output_size

    patches = columns.reshape(n, g.in_channels, kh, kw, h_out, w_out)
    image = np.zeros((n, g.in_channels, h + 2 * ph, w + 2 * pw), dtype=columns.dtype)
    for r in range(kh):
        r_max = r + sh * h_out
        for s in range(kw):
            s_max = s + sw * w_out
            image[:, :, r:r_max:sh, s:s_max:sw] += patches[:, :, r, s, :, :]
    return image[:, :, ph:ph + h, pw:pw + w]


def unfold(x: Tensor, g: ConvGeometry) -> List[Im2ColMatrix]:
    columns = unfold_batch(x, g)
    return [Im2ColMatrix(data=columns[i], geometry=g) for i in range(columns.shape[0])]


def fold(grad_patches: Im2ColMatrix, g: ConvGeometry) -> Tensor:
    return fold_batch(grad_patches.data[np.newaxis], g)[0]


def patch_count_map(g: ConvGeometry) -> Tensor:
    """
    Number of patches each input pixel falls in; fold(unfold(x)) == x * map.
    """
    ones = np.ones((1, g.in_channels, *g.input_size))
    return fold_batch(unfold_batch(ones, g), g)[0]
