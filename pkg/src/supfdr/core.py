"""Shared domain types: weight sequences, harmonic numbers and FDP metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PREFIX_TOL = 1e-12


class ConfigError(ValueError):
    """Invalid procedure or run configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class CapabilityError(RuntimeError):
    """Request exceeds what an exhaustive routine can enumerate."""


class ParseError(ValueError):
    """Malformed input file; carries the offending row when known."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


def gamma_default(t):
    """Weight ``1 / (t (t + 1))``; the series telescopes to 1."""
    if t < 1:
        raise DomainError(f"gamma index must be >= 1, got {t}")
    return 1.0 / (t * (t + 1.0))


def _gamma_default_vec(t):
    return 1.0 / (t * (t + 1.0))


_NAMED_RULES = {
    "default": _gamma_default_vec,
    "zero": lambda t: np.zeros_like(t, dtype=float),
}


class GammaSequence:
    """Nonnegative weights ``gamma_t``, ``t >= 1``, generated by a rule.

    The rule maps an integer array of indices to weights. Values and prefix
    sums are cached as they are requested so that unbounded streams never
    need a stored table up front.

    Parameters
    ----------
    rule : str or callable
        ``"default"`` for ``1/(t(t+1))``, ``"zero"``, or a callable accepting
        a numpy integer array.
    table : sequence of float, optional
        Explicit leading weights ``gamma_1, ..., gamma_n``; ``rule`` supplies
        the tail ``t > n``.
    """

    def __init__(self, rule="default", table=None, name=None):
        if isinstance(rule, str):
            if rule not in _NAMED_RULES:
                raise ConfigError(f"unknown gamma rule {rule!r}")
            self.name = name or rule
            rule = _NAMED_RULES[rule]
        else:
            self.name = name or getattr(rule, "__name__", "custom")
        self.rule = rule
        self.table = None if table is None else np.asarray(table, dtype=float)
        self._values = np.empty(0)
        self._prefix = np.empty(0)
        # Neumaier running sum keeps long prefixes accurate.
        self._sum = 0.0
        self._comp = 0.0

    def __repr__(self):
        return f"GammaSequence({self.name!r})"

    def _generate(self, start, stop):
        idx = np.arange(start, stop + 1)
        out = np.empty(idx.size)
        n_tab = 0 if self.table is None else self.table.size
        head = idx <= n_tab
        if head.any():
            out[head] = self.table[idx[head] - 1]
        if (~head).any():
            out[~head] = np.asarray(self.rule(idx[~head].astype(float)), dtype=float)
        return out

    def _extend(self, n):
        have = self._values.size
        if n <= have:
            return
        n_new = max(n, 2 * have)
        new = self._generate(have + 1, n_new)
        prefix = np.empty(new.size)
        s, c = self._sum, self._comp
        for j, g in enumerate(new.tolist()):
            tot = s + g
            if abs(s) >= abs(g):
                c += (s - tot) + g
            else:
                c += (g - tot) + s
            s = tot
            prefix[j] = s + c
        self._sum, self._comp = s, c
        self._values = np.concatenate([self._values, new])
        self._prefix = np.concatenate([self._prefix, prefix])

    def __call__(self, t):
        if t < 1:
            raise DomainError(f"gamma index must be >= 1, got {t}")
        self._extend(t)
        return float(self._values[t - 1])

    def values(self, n):
        """First ``n`` weights as a read-only array."""
        self._extend(n)
        out = self._values[:n]
        out.flags.writeable = False
        return out

    def prefix(self, t):
        """``sum_{i <= t} gamma_i``; 0 for ``t = 0``."""
        if t <= 0:
            return 0.0
        self._extend(t)
        return float(self._prefix[t - 1])

    def prefix_values(self, n):
        """Array ``[G_0, G_1, ..., G_n]`` of prefix sums with ``G_0 = 0``."""
        self._extend(n)
        return np.concatenate([[0.0], self._prefix[:n]])


@dataclass(frozen=True)
class GammaReport:
    ok: bool
    horizon: int
    prefix_sum: float
    first_violation: Optional[int] = None
    reason: str = ""


def gamma_validate(seq, horizon):
    """Check nonnegativity and ``sum gamma <= 1`` up to ``horizon``.

    Returns a :class:`GammaReport`; never raises for a bad sequence.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    seq = as_gamma(seq)
    vals = seq.values(horizon)
    neg = np.flatnonzero(vals < 0)
    if neg.size:
        t = int(neg[0]) + 1
        return GammaReport(False, horizon, seq.prefix(t), t, f"gamma_{t} = {vals[t - 1]} < 0")
    pref = seq.prefix_values(horizon)[1:]
    over = np.flatnonzero(pref > 1.0 + PREFIX_TOL)
    if over.size:
        t = int(over[0]) + 1
        return GammaReport(False, horizon, float(pref[t - 1]), t, f"prefix sum {pref[t - 1]} exceeds 1")
    return GammaReport(True, horizon, float(pref[-1]))


def as_gamma(gamma):
    """Coerce a user-facing gamma specification into a :class:`GammaSequence`."""
    if isinstance(gamma, GammaSequence):
        return gamma
    if gamma is None or isinstance(gamma, str):
        return GammaSequence(gamma or "default")
    if callable(gamma):
        return GammaSequence(gamma)
    arr = np.asarray(gamma, dtype=float)
    if arr.ndim != 1:
        raise ConfigError("explicit gamma table must be one-dimensional")
    return GammaSequence("zero", table=arr, name="table")


_HARMONIC = [0.0]


def harmonic(t):
    """``t``-th harmonic number, accumulated incrementally and cached."""
    if t < 1:
        raise DomainError(f"harmonic index must be >= 1, got {t}")
    while len(_HARMONIC) <= t:
        n = len(_HARMONIC)
        _HARMONIC.append(_HARMONIC[-1] + 1.0 / n)
    return _HARMONIC[t]


def harmonic_values(n):
    """Array ``[ell_1, ..., ell_n]``."""
    if n >= 1:
        harmonic(n)
    return np.asarray(_HARMONIC[1:n + 1], dtype=float)


def fdp(candidate_nulls, rejections):
    """False discovery proportion ``|S & R| / max(|R|, 1)``."""
    rejections = set(rejections)
    if not rejections:
        return 0.0
    return len(set(candidate_nulls) & rejections) / len(rejections)


def sup_fdp(null_set, trajectory):
    """Largest FDP along a nested sequence of rejection sets."""
    null_set = set(null_set)
    return max((fdp(null_set, r) for r in trajectory), default=0.0)


def sup_fdp_from_times(rejection_time, is_null):
    """Sup-FDP of the trajectory encoded by per-index rejection times.

    ``rejection_time[i]`` is the step at which index ``i + 1`` joined the
    rejection set (0 if never). Equivalent to :func:`sup_fdp` on the implied
    nested sets.
    """
    rejection_time = np.asarray(rejection_time)
    is_null = np.asarray(is_null, dtype=bool)
    hit = rejection_time > 0
    if not hit.any():
        return 0.0
    horizon = int(rejection_time.max())
    n_rej = np.bincount(rejection_time[hit], minlength=horizon + 1).cumsum()
    n_false = np.bincount(rejection_time[hit & is_null], minlength=horizon + 1).cumsum()
    return float(np.max(n_false / np.maximum(n_rej, 1)))


@dataclass(frozen=True)
class Observation:
    """One stream element carrying either an e-value or a p-value."""

    index: int
    e_value: Optional[float] = None
    p_value: Optional[float] = None
    is_null: Optional[bool] = None
    deadline: Optional[int] = None

    def __post_init__(self):
        if self.index < 1:
            raise DomainError(f"index must be >= 1, got {self.index}")
        if (self.e_value is None) == (self.p_value is None):
            raise DomainError("exactly one of e_value / p_value is required")
        if self.e_value is not None and not self.e_value >= 0:
            raise DomainError(f"e-value must be >= 0, got {self.e_value}")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value must lie in [0, 1], got {self.p_value}")
        if self.deadline is not None and self.deadline < self.index:
            raise DomainError(f"deadline {self.deadline} precedes index {self.index}")

    @property
    def evidence(self):
        return self.e_value if self.e_value is not None else self.p_value


@dataclass
class RejectionRecord:
    """Decision history of a sequential procedure.

    Rejection sets are nested, so the whole trajectory is captured by the
    step at which each index was rejected (0 = never).
    """

    rejection_time: np.ndarray
    alpha: Optional[np.ndarray] = None
    wealth: Optional[np.ndarray] = None
    n_rejections: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rejection_time = np.asarray(self.rejection_time, dtype=np.int64)
        if self.n_rejections is None:
            t = self.rejection_time.size
            hit = self.rejection_time[self.rejection_time > 0]
            self.n_rejections = np.bincount(hit, minlength=t + 1)[1:].cumsum()

    @property
    def decisions(self):
        """Whether index ``t`` was rejected at its own arrival step."""
        return self.rejection_time == np.arange(1, self.rejection_time.size + 1)

    def rejected_set(self, t=None):
        """``R_t`` as a sorted list of 1-based indices (final set by default)."""
        t = self.rejection_time.size if t is None else t
        rt = self.rejection_time
        return [int(i) + 1 for i in np.flatnonzero((rt > 0) & (rt <= t))]

    def trajectory(self):
        return [self.rejected_set(t) for t in range(1, self.rejection_time.size + 1)]


def is_close(a, b, rel=1e-9, abs_tol=0.0):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_tol)
