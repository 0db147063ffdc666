"""Increasing e-collections, closure membership, and the closed procedures."""

import itertools

import numpy as np

from . import _kernels
from .base import OnlineProcedure, e_threshold
from .calibration import calibrate_p
from .core import CapabilityError, DomainError, as_gamma, harmonic_values
from .validation import check_delta

KINDS = ("reset", "gap", "calibrated-reset")
MAX_EXHAUSTIVE_T = 16


def _sorted_members(S, t):
    s = sorted(int(i) for i in S)
    if s and (s[0] < 1 or s[-1] > t):
        raise DomainError(f"subset {s} is not contained in [1, {t}]")
    return s


def ecollection_value(kind, S, history, gamma="default", delta=0.1):
    """Evaluate ``E_S`` for one member of an increasing e-collection.

    Parameters
    ----------
    kind : {"reset", "gap", "calibrated-reset"} or callable
        ``reset`` weights the ``j``-th smallest element of ``S`` by
        ``gamma_j``; ``gap`` weights it by the gamma mass since the previous
        element; ``calibrated-reset`` is the reset weighting applied to the
        calibrated p-values ``f_j(P_i)``. A callable receives the sorted
        tuple ``S`` and returns one weight per element.
    S : iterable of int
        1-based indices, all at most ``len(history)``.
    history : array-like
        e-values (or p-values for ``calibrated-reset``) of hypotheses ``1..t``.
    """
    x = np.asarray(history, dtype=float)
    s = _sorted_members(S, x.size)
    if not s:
        return 0.0
    if callable(kind):
        w = np.asarray(kind(tuple(s)), dtype=float)
        return float(np.dot(w, x[np.asarray(s) - 1]))
    g = as_gamma(gamma)
    total = 0.0
    if kind == "reset":
        for j, i in enumerate(s, start=1):
            total += g(j) * x[i - 1]
    elif kind == "gap":
        prev = 0
        for i in s:
            total += (g.prefix(i) - g.prefix(prev)) * x[i - 1]
            prev = i
    elif kind == "calibrated-reset":
        for j, i in enumerate(s, start=1):
            total += g(j) * calibrate_p(x[i - 1], j, g(j), delta)
    else:
        raise DomainError(f"unknown e-collection kind {kind!r}")
    return float(total)


def _subset_masks(n):
    """All ``2^n`` subsets of ``[n]`` as a boolean matrix, row ``b`` <-> bitmask ``b``."""
    b = np.arange(1 << n, dtype=np.int64)[:, None]
    return ((b >> np.arange(n)) & 1).astype(bool)


def _collection_matrix(kind, masks, x, gamma, delta):
    """``E_S`` for every row of ``masks`` (vectorized over subsets)."""
    n = masks.shape[1]
    g = as_gamma(gamma)
    rank = np.cumsum(masks, axis=1)
    if kind == "reset":
        gv = np.concatenate([[0.0], g.values(max(n, 1))])
        return (gv[rank] * x * masks).sum(axis=1)
    if kind == "gap":
        G = g.prefix_values(max(n, 1))
        idx = np.arange(1, n + 1)
        last = np.zeros(masks.shape[0], dtype=np.int64)
        out = np.zeros(masks.shape[0])
        for i in range(n):
            m = masks[:, i]
            out[m] += (G[idx[i]] - G[last[m]]) * x[i]
            last[m] = idx[i]
        return out
    if kind == "calibrated-reset":
        table = np.zeros((n + 1, n))
        for k in range(1, n + 1):
            gk = g(k)
            table[k] = [gk * calibrate_p(p, k, gk, delta) for p in x.tolist()]
        return (table[rank, np.arange(n)] * masks).sum(axis=1)
    raise DomainError(f"unknown e-collection kind {kind!r}")


def closure_membership(R, t, kind, history, delta=0.1, gamma="default", rtol=1e-12):
    """Whether ``R`` belongs to the e-closure collection at time ``t``.

    Checks ``delta E_S >= |S & R| / (|R| v 1)`` for every ``S`` in ``2^[t]``;
    ``rtol`` absorbs floating rounding at exact boundaries. Exhaustive, so
    ``t`` is limited to 16.
    """
    delta = check_delta(delta)
    if t > MAX_EXHAUSTIVE_T:
        raise CapabilityError(f"exhaustive closure check limited to t <= {MAX_EXHAUSTIVE_T}, got {t}")
    x = np.asarray(history, dtype=float)[:t]
    if x.size < t:
        raise DomainError(f"history holds {x.size} values, need {t}")
    r = _sorted_members(R, t)
    if not r:
        return True
    in_r = np.zeros(t, dtype=bool)
    in_r[np.asarray(r) - 1] = True
    need_den = len(r)
    if callable(kind):
        for bits in itertools.product((False, True), repeat=t):
            S = [i + 1 for i in range(t) if bits[i]]
            if not S:
                continue
            lhs = delta * ecollection_value(kind, S, x)
            rhs = in_r[np.asarray(S) - 1].sum() / need_den
            if lhs < rhs * (1 - rtol):
                return False
        return True
    masks = _subset_masks(t)
    es = _collection_matrix(kind, masks, x, gamma, delta)
    lhs = delta * es
    rhs = (masks & in_r).sum(axis=1) / need_den
    return bool(np.all(lhs >= rhs * (1 - rtol)))


class _Buffer:
    """Growable float/bool history so kernels see contiguous arrays."""

    def __init__(self, dtype):
        self.data = np.empty(64, dtype=dtype)
        self.n = 0

    def append(self, v):
        if self.n == self.data.size:
            self.data = np.concatenate([self.data, np.empty_like(self.data)])
        self.data[self.n] = v
        self.n += 1

    def view(self):
        return self.data[: self.n]


class _ClosedBase(OnlineProcedure):
    def _init_state(self):
        self._x = _Buffer(float)
        self._in_r = _Buffer(np.bool_)

    def _record(self, x, alpha, reject):
        t = self.t_ + 1
        self._x.append(x)
        self._in_r.append(reject)
        self._commit(alpha, (t,) if reject else ())


class ClosedELOND(_ClosedBase):
    """Closed e-LOND with the reset e-collection.

    The level minimizes over all subsets of the past via an ``O(t^2)``
    recursion on subset size. Dominates e-LOND whenever gamma is
    nonincreasing.
    """

    def _level(self, t):
        gam = np.ascontiguousarray(self.gamma_.values(t))
        return _kernels.closed_elond_level(
            self._x.view(), gam, self._in_r.view(), len(self._rejected), self.delta_
        )

    def _step(self, e, deadline):
        alpha = self._level(self.t_ + 1)
        self._record(e, alpha, e >= e_threshold(alpha))


class ClosedELONDAlt(_ClosedBase):
    """Closed e-LOND with the gap-weighted collection; dominates e-LOND for any gamma."""

    def _level(self, t):
        G = np.ascontiguousarray(self.gamma_.prefix_values(t))
        return _kernels.closed_elond_alt_level(
            self._x.view(), G, self._in_r.view(), len(self._rejected), self.delta_
        )

    def _step(self, e, deadline):
        alpha = self._level(self.t_ + 1)
        self._record(e, alpha, e >= e_threshold(alpha))


class ClosedRLOND(_ClosedBase):
    """Closed r-LOND for arbitrarily dependent p-values.

    Parameters
    ----------
    restrict_to_rejections : bool, default=False
        Only let past rejections enter the subset recursion. This drops
        constraints, so the level can exceed the exact closed level and the
        resulting procedure is not guaranteed to stay inside the closure.
        Kept for comparison; the default is the exact recursion.
    """

    evidence = "p"

    def __init__(self, delta=0.1, gamma="default", restrict_to_rejections=False):
        super().__init__(delta=delta, gamma=gamma)
        self.restrict_to_rejections = restrict_to_rejections

    def _level(self, t):
        gam = np.ascontiguousarray(self.gamma_.values(t))
        return _kernels.closed_rlond_level(
            self._x.view(), gam, harmonic_values(t), self._in_r.view(),
            len(self._rejected), self.delta_, bool(self.restrict_to_rejections),
        )

    def _step(self, p, deadline):
        alpha = self._level(self.t_ + 1)
        self._record(p, alpha, p <= alpha)
