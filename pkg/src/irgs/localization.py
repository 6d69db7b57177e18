"""Separable Butterworth attention around a center and its hard weights."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ButterworthParams:
    n: int = 4
    f: float = 6.0  # cutoff radius in pixels

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Butterworth order n must be >= 1")
        if not self.f > 0:
            raise ValueError("Butterworth cutoff f must be positive")


def butterworth_1d(r, p):
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    out = 1.0 / np.sqrt(1.0 + (r / p.f) ** (2 * p.n))
    return float(out) if out.ndim == 0 else out


def butterworth_mask(h, w, center, p):
    ic, jc = center
    if not (0 <= ic < h and 0 <= jc < w):
        raise ValueError(f"center {center} outside a {h}x{w} plane")
    gi = butterworth_1d(np.abs(np.arange(h, dtype=np.float64) - ic), p)
    gj = butterworth_1d(np.abs(np.arange(w, dtype=np.float64) - jc), p)
    return np.outer(gi, gj)


def hard_weights(g):
    return (np.asarray(g) > 0.5).astype(np.float64)
