"""Image and mask-plane conventions shared by the rest of the package.

Images are float64 arrays of shape ``(H, W, 3)`` with values in [0, 1];
mask planes are float64 arrays of shape ``(H, W)``. Indexing is row-major
with (0, 0) at the top-left.
"""
import numpy as np


class ShapeError(ValueError):
    """Raised when arrays that must share a grid do not."""


def as_image(arr, name="image"):
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ShapeError(f"{name} must have shape (H, W, 3), got {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be at least 1x1")
    if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return a


def as_mask(arr, shape=None, name="mask", bounded=True):
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {a.shape}")
    if shape is not None and a.shape != tuple(shape[:2]):
        raise ShapeError(f"{name} has shape {a.shape}, expected {tuple(shape[:2])}")
    if bounded and (a.size and (a.min() < 0.0 or a.max() > 1.0)):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return a


def coordinate_planes(h, w):
    """Row and column index planes normalized to [0, 1]; 0 along unit axes."""
    rows = np.arange(h, dtype=np.float64) / (h - 1) if h > 1 else np.zeros(1)
    cols = np.arange(w, dtype=np.float64) / (w - 1) if w > 1 else np.zeros(1)
    return np.broadcast_to(rows[:, None], (h, w)), np.broadcast_to(cols[None, :], (h, w))


def build_features(img):
    """Per-pixel 5-vectors ``(r, g, b, row_norm, col_norm)`` as an (H, W, 5) array."""
    img = as_image(img)
    h, w, _ = img.shape
    rows, cols = coordinate_planes(h, w)
    feats = np.empty((h, w, 5))
    feats[..., :3] = img
    feats[..., 3] = rows
    feats[..., 4] = cols
    return feats
