"""Input validation helpers shared across estimators."""
from __future__ import annotations

import numpy as np


def check_matrix(a, name: str, *, n_cols: int | None = None, allow_1d: bool = False) -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array.

    With ``allow_1d`` a vector is promoted to a single column.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1 and allow_1d:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} is empty (shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"dimension mismatch: {name} has {arr.shape[1]} columns, expected {n_cols}")
    return arr


def check_vector(v, size: int | None, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"dimension mismatch: {name} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr
