"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array, check_consistent_length


def check_hours(X, name: str = "X") -> np.ndarray:
    """Return elapsed hours as a 1-D float array.

    Accepts a 1-D sequence or an ``(n, 1)`` array, as sklearn estimators
    receive a single feature column.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] != 1:
        raise ValueError(f"{name} must hold a single column of hours, got shape {arr.shape}")
    arr = check_array(arr.reshape(-1, 1), dtype=np.float64, ensure_min_samples=1, input_name=name)
    hours = arr[:, 0]
    if np.any(hours < 0):
        raise ValueError(f"{name} must contain non-negative hours")
    return hours


def check_progress(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate paired ``(hours, progress)`` observations."""
    hours = check_hours(X)
    q = check_array(np.asarray(y, dtype=np.float64), ensure_2d=False, dtype=np.float64, input_name="y")
    if q.ndim != 1:
        raise ValueError("y must be one-dimensional progress values")
    check_consistent_length(hours, q)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("progress values must lie in [0, 1]")
    return hours, q
