"""Reconstruction quality, area quality and best-region center."""
from dataclasses import dataclass

import numpy as np

from irgs import kernels
from irgs.imgcore import ShapeError, as_mask


@dataclass(frozen=True)
class QualityParams:
    sigma1: float = 0.01
    kernel_size: int = 5

    def __post_init__(self):
        if not self.sigma1 > 0:
            raise ValueError("sigma1 must be positive")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be an odd positive integer")


def squared_error(x, x_re):
    """Per-pixel squared error summed over channels."""
    x = np.asarray(x, dtype=np.float64)
    x_re = np.asarray(x_re, dtype=np.float64)
    if x.shape != x_re.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {x_re.shape}")
    d = x_re - x
    return np.sum(d * d, axis=2)


def compute_quality(x, x_re, s, p):
    """``exp(-s * sum_c (x_re - x)^2 / (2 sigma1))``.

    ``sigma1`` is treated as a variance, so it is not squared.
    """
    err = squared_error(x, x_re)
    s = as_mask(s, err.shape, "remaining mask")
    return np.exp(-s * err / (2.0 * p.sigma1))


def area_quality(masked_q, p):
    """Sum of ``masked_q`` over a ``kernel_size`` square window, zero padded."""
    plane = np.ascontiguousarray(masked_q, dtype=np.float64)
    if plane.ndim != 2:
        raise ShapeError("area_quality expects a 2-D plane")
    if p.kernel_size > min(plane.shape):
        raise ValueError(
            f"kernel_size {p.kernel_size} exceeds plane size {plane.shape}")
    return kernels.box_sum(plane, p.kernel_size)


def find_center(q_area):
    """Row-major first argmax, so ties go to the smallest row then column."""
    q_area = np.asarray(q_area)
    if q_area.size == 0:
        raise ValueError("empty plane")
    flat = int(np.argmax(q_area))
    i, j = np.unravel_index(flat, q_area.shape)
    return int(i), int(j)
