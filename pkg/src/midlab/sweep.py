"""Sweep operator for symmetric matrices.

Sweeping a covariance matrix on a set of pivot indices turns it into the
regression of the unswept coordinates on the swept ones: after ``sweep(a, S)``,
entry (i, j) for i, j outside S is the residual covariance of i and j given S,
entry (i, s) for s in S is the regression coefficient of coordinate i on
coordinate s, and the S x S block holds the negated inverse of the original
pivot block. Sweeping all pivots of a positive-definite A yields -inv(A).
"""

import numpy as np

from .errors import SingularPivotError, ValidationError


def _as_square(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("sweep expects a square matrix")
    return a


def _check_pivots(pivots, k: int) -> list[int]:
    idx = [int(p) for p in pivots]
    if len(set(idx)) != len(idx):
        raise ValidationError("pivot indices must be distinct")
    if any(p < 0 or p >= k for p in idx):
        raise ValidationError(f"pivot indices must lie in [0, {k})")
    return idx


def sweep(a, pivots) -> np.ndarray:
    """Sweep a symmetric matrix on the given pivot indices (0-based).

    Raises SingularPivotError if any pivot element is <= 0 at the time it is
    swept, i.e. the pivot submatrix is not positive definite.
    """
    g = _as_square(a)
    for p in _check_pivots(pivots, g.shape[0]):
        d = g[p, p]
        if not np.isfinite(d) or d <= 0.0:
            raise SingularPivotError(f"pivot {p} is {d}; pivot block is not positive definite")
        row = g[p].copy()
        g -= np.outer(row, row) / d
        g[p, :] = row / d
        g[:, p] = row / d
        g[p, p] = -1.0 / d
    return g


def reverse_sweep(a, pivots) -> np.ndarray:
    """Undo sweep: ``reverse_sweep(sweep(a, S), S)`` restores ``a``."""
    g = _as_square(a)
    for p in _check_pivots(pivots, g.shape[0]):
        d = g[p, p]
        if not np.isfinite(d) or d == 0.0:
            raise SingularPivotError(f"pivot {p} is {d}; cannot reverse-sweep")
        row = g[p].copy()
        g -= np.outer(row, row) / d
        g[p, :] = -row / d
        g[:, p] = -row / d
        g[p, p] = -1.0 / d
    return g
