"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray


def check_observations(y: ArrayLike, n: int | None = None) -> NDArray[np.complex128]:
    """Validate an observation vector: 1-d, odd length, finite and not identically zero.

    Complex input is accepted, unlike :func:`sklearn.utils.check_array`.
    """
    arr = np.asarray(y)
    if arr.dtype == object:
        raise ValueError("observations must be numeric")
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"observations must be a 1-d vector, got shape {arr.shape}")
    if arr.size % 2 != 1 or arr.size < 3:
        raise ValueError(f"observation length must be odd and >= 3, got {arr.size}")
    if n is not None and arr.size != n:
        raise ValueError(f"expected {n} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("observations contain NaN or infinite values")
    if not np.any(arr):
        raise ValueError("observation vector is identically zero")
    return arr


def check_positions(t: ArrayLike) -> NDArray[np.float64]:
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if arr.ndim != 1:
        raise ValueError("positions must be a 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("positions contain NaN or infinite values")
    return arr


def check_fraction(value: float, name: str, closed_right: bool = True) -> float:
    value = float(value)
    ok = 0 < value <= 1 if closed_right else 0 < value < 1
    if not ok:
        interval = "(0, 1]" if closed_right else "(0, 1)"
        raise ValueError(f"{name} must lie in {interval}, got {value}")
    return value
