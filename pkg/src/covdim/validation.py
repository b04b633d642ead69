"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, DomainError, EmptyInputError, SampleTooSmallError

# Relative asymmetry tolerated in matrices that come from data files or user code.
INGEST_SYMMETRY_RTOL = 1e-12


def check_square(A, name: str = "matrix") -> np.ndarray:
    """Return ``A`` as a float64 square 2-d array or raise DimensionError."""
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionError(f"{name} must be a nonempty square 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def check_symmetric(A, name: str = "matrix", rtol: float = INGEST_SYMMETRY_RTOL) -> np.ndarray:
    """Validate symmetry up to ``rtol * max|A|`` and return the exactly symmetrized matrix."""
    arr = check_square(A, name)
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    if np.max(np.abs(arr - arr.T)) > rtol * scale:
        raise DimensionError(f"{name} is not symmetric")
    return 0.5 * (arr + arr.T)


def check_matrix_list(mats: Iterable, name: str = "matrices") -> np.ndarray:
    """Stack a list of equally sized symmetric matrices into a ``(q, p, p)`` array."""
    if isinstance(mats, np.ndarray) and mats.ndim == 3:
        stack = np.asarray(mats, dtype=np.float64)
        if stack.shape[0] == 0:
            raise EmptyInputError(f"{name} is empty")
        if stack.shape[1] != stack.shape[2]:
            raise DimensionError(f"{name} must hold square matrices")
        return stack
    mats = list(mats)
    if not mats:
        raise EmptyInputError(f"{name} is empty")
    arrays = [check_square(m, f"{name}[{i}]") for i, m in enumerate(mats)]
    p = arrays[0].shape[0]
    for i, a in enumerate(arrays):
        if a.shape[0] != p:
            raise DimensionError(f"{name}[{i}] has dimension {a.shape[0]}, expected {p}")
    return np.stack(arrays)


def check_same_dim(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise DimensionError(f"dimension mismatch: {A.shape} vs {B.shape}")


def check_probability(alpha: float, name: str = "alpha") -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {alpha}")
    return alpha


def check_group_arrays(X: Sequence, min_samples: int = 5) -> list[np.ndarray]:
    """Validate sklearn-style grouped input: a sequence of ``(n_i, p)`` arrays.

    Returns the arrays as float64 with rows as observations. Raises if the
    groups disagree on ``p`` or a group is smaller than ``min_samples``.
    """
    groups = [np.asarray(x, dtype=np.float64) for x in X]
    if not groups:
        raise EmptyInputError("no groups supplied")
    p = None
    for i, g in enumerate(groups):
        if g.ndim != 2:
            raise DimensionError(f"group {i} must be 2-d (n_samples, n_features), got shape {g.shape}")
        if p is None:
            p = g.shape[1]
        elif g.shape[1] != p:
            raise DimensionError(f"group {i} has {g.shape[1]} features, expected {p}")
        if g.shape[0] < min_samples:
            raise SampleTooSmallError(f"group {i} has {g.shape[0]} observations, need at least {min_samples}")
        if not np.all(np.isfinite(g)):
            raise DimensionError(f"group {i} contains non-finite values")
    return groups
