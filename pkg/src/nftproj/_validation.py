"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatch


def check_windows(windows, window: int) -> np.ndarray:
    """Coerce to a finite float array of shape (n, window, 2)."""
    arr = np.asarray(windows, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (window, 2):
        raise ShapeMismatch(f"expected windows of shape (n, {window}, 2), got {np.shape(windows)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("windows contain NaN or infinity")
    return arr


def check_contexts(contexts, n: int, dim: int) -> np.ndarray:
    """Broadcast ``None``, one vector or an (n, dim) array to (n, dim)."""
    if contexts is None:
        return np.zeros((n, dim))
    arr = np.asarray(contexts, dtype=np.float64)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n, arr.shape[0]))
    if arr.shape != (n, dim):
        raise ShapeMismatch(f"expected contexts of shape ({n}, {dim}), got {np.shape(contexts)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("contexts contain NaN or infinity")
    return np.ascontiguousarray(arr)
