import numpy as np

from ..core.tensor import Rng, Tensor
from ..data_types import AugmentFlags


def hflip(image: Tensor) -> Tensor:
    return image[..., ::-1].copy()


def shift_image(image: Tensor, dx: int, dy: int) -> Tensor:
    """
    Translate a C x H x W image by dx columns and dy rows, zero filled.
    Positive dx moves content right.
    """
    _, h, w = image.shape
    out = np.zeros_like(image)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src_rows = slice(max(0, -dy), h - max(0, dy))
    dst_rows = slice(max(0, dy), h - max(0, -dy))
    src_cols = slice(max(0, -dx), w - max(0, dx))
    dst_cols = slice(max(0, dx), w - max(0, -dx))
    out[:, dst_rows, dst_cols] = image[:, src_rows, src_cols]
    return out


def augment(images: Tensor, rng: Rng, flags: AugmentFlags) -> Tensor:
    """
    Per image: horizontal flip with p=0.5, then an integer shift drawn
    uniformly from [-floor(frac*side), +floor(frac*side)] per axis.
    """
    if not (0.0 <= flags.shift_frac < 1.0):
        raise ValueError(f"shift_frac must lie in [0, 1), got {flags.shift_frac}")
    if not flags.hflip and flags.shift_frac == 0.0:
        return images
    _, _, h, w = images.shape
    max_dy, max_dx = int(np.floor(flags.shift_frac * h)), int(np.floor(flags.shift_frac * w))
    out = np.empty_like(images)
    for i in range(images.shape[0]):
        image = images[i]
        # draw all three numbers for every image so streams stay aligned
        flip = rng.random() < 0.5
        dx = int(rng.integers(-max_dx, max_dx + 1))
        dy = int(rng.integers(-max_dy, max_dy + 1))
        if flags.hflip and flip:
            image = hflip(image)
        out[i] = shift_image(image, dx, dy) if (dx or dy) else image
    return out
