"""Input validation helpers shared by the estimators and the CLI."""

import numbers

import numpy as np

from .core import ConfigError, DomainError


def check_delta(delta):
    if not isinstance(delta, numbers.Real) or not 0.0 < delta <= 1.0:
        raise ConfigError(f"delta must lie in (0, 1], got {delta!r}")
    return float(delta)


def _as_1d(X, what):
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    elif arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise DomainError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise DomainError(f"{what} contain NaN")
    return arr


def check_evalues(X):
    """Return ``X`` as a float vector of nonnegative e-values."""
    arr = _as_1d(X, "e-values")
    if (arr < 0).any():
        bad = int(np.flatnonzero(arr < 0)[0])
        raise DomainError(f"e-value at position {bad + 1} is negative ({arr[bad]})")
    return arr


def check_pvalues(X):
    """Return ``X`` as a float vector of p-values in ``[0, 1]``."""
    arr = _as_1d(X, "p-values")
    bad = (arr < 0) | (arr > 1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"p-value at position {i + 1} outside [0, 1] ({arr[i]})")
    return arr


def check_deadlines(deadlines, start, n):
    """Deadlines for positions ``start + 1 .. start + n``; ``None`` means never."""
    if deadlines is None:
        return np.full(n, np.inf)
    d = np.asarray(deadlines, dtype=float).ravel()
    if d.size != n:
        raise DomainError(f"expected {n} deadlines, got {d.size}")
    d = np.where(np.isnan(d), np.inf, d)
    idx = np.arange(start + 1, start + n + 1)
    late = d < idx
    if late.any():
        i = int(np.flatnonzero(late)[0])
        raise DomainError(f"deadline {d[i]:g} of hypothesis {idx[i]} is already in the past")
    return d
