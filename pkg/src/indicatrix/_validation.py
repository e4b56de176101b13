"""Input validation helpers."""

from __future__ import annotations

import numpy as np

from .jets import DomainError

# Vectors shorter than this are treated as the excluded zero vector.
ZERO_THRESHOLD = 1e-12


def check_vector(y, dimension: int | None = None, *, name: str = "y", nonzero: bool = True):
    """Return ``y`` as a finite 1-d float array, optionally checking its length."""
    arr = np.array(y, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError(f"{name} must have at least 2 components")
    if dimension is not None and arr.size != dimension:
        raise ValueError(f"{name} has {arr.size} components, expected {dimension}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite components")
    if nonzero and np.linalg.norm(arr) < ZERO_THRESHOLD:
        raise DomainError(f"{name} is the zero vector")
    return arr


def check_points(Y, dimension: int):
    """Validate a batch of nonzero points of shape ``(..., dimension)``."""
    arr = np.asarray(Y, dtype=float)
    if arr.shape[-1:] != (dimension,):
        raise ValueError(f"points must have trailing dimension {dimension}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points have non-finite components")
    if np.any(np.linalg.norm(arr, axis=-1) < ZERO_THRESHOLD):
        raise DomainError("zero vector in points")
    return arr


def check_spd_matrix(A, dimension: int | None = None, *, name: str = "A"):
    """Return ``A`` as a symmetric positive definite float matrix."""
    arr = np.array(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if dimension is not None and arr.shape[0] != dimension:
        raise ValueError(f"{name} must be {dimension}x{dimension}")
    if arr.shape[0] < 2:
        raise ValueError(f"{name} must be at least 2x2")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if not np.allclose(arr, arr.T, rtol=0, atol=1e-12 * max(1.0, np.abs(arr).max())):
        raise ValueError(f"{name} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    try:
        np.linalg.cholesky(arr)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} is not positive definite") from None
    return arr
