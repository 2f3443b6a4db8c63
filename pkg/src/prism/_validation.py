"""Input validation helpers.

Every public operation funnels its array arguments through these so that
error behaviour (non-finite rejection, shape checks, dtype widening to
float64) is identical across the package.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError


def as_matrix(a, name: str = "matrix", allow_empty_rows: bool = False) -> np.ndarray:
    """Coerce to a finite, 2-D float64 array.

    Silent NaN propagation would invalidate bound certificates, so any
    non-finite entry raises immediately. 32-bit input is widened; float64
    input is passed through without copying.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[1] < 1:
        raise ShapeMismatchError(f"{name} must have at least one column, got shape {arr.shape}")
    if arr.shape[0] < 1 and not allow_empty_rows:
        raise ShapeMismatchError(f"{name} must have at least one row, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(
            f"{name_a} and {name_b} must share a shape, got {a.shape} vs {b.shape}"
        )


def check_labels(labels, n: int, vocab: int) -> np.ndarray:
    """Coerce token-index labels to int64 and range-check against [0, vocab)."""
    idx = np.asarray(labels)
    if idx.ndim != 1:
        raise ShapeMismatchError(f"labels must be 1-D, got ndim={idx.ndim}")
    if idx.shape[0] != n:
        raise ShapeMismatchError(f"expected {n} labels, got {idx.shape[0]}")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        as_int = idx.astype(np.int64)
        if not np.array_equal(as_int, idx):
            raise ValueError("labels must be integer token indices")
        idx = as_int
    idx = idx.astype(np.int64, copy=False)
    if idx.size and (idx.min() < 0 or idx.max() >= vocab):
        raise ValueError(f"label out of range for vocabulary size {vocab}")
    return idx
