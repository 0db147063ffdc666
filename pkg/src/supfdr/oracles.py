"""Slow reference implementations used to cross-check the fast paths.

Everything here is a direct evaluation of a defining formula: subset
enumeration, full-history sums, or a scan over every candidate rank.
"""

import math
from dataclasses import dataclass

import numpy as np

from .calibration import scaled_calibrated
from .closure import _subset_masks
from .core import CapabilityError, DomainError, as_gamma, harmonic_values
from .validation import check_delta


@dataclass(frozen=True)
class OracleBudget:
    max_t_exhaustive: int = 16
    max_t_scan: int = 5000

    def __post_init__(self):
        if self.max_t_exhaustive < 1 or self.max_t_scan < 1:
            raise DomainError("oracle budgets must be positive")


DEFAULT_BUDGET = OracleBudget()


def _subset_gains(kind, masks, x, in_r, n_rej, delta, g):
    """``|S & R| - delta (|R|+1) E_S`` for every subset, summed in index order.

    Terms are accumulated one index at a time, adding zero for non-members,
    so the result is bit-identical to any recursion that builds the same set
    left to right.
    """
    n_sub, n = masks.shape
    c = delta * (n_rej + 1)
    r1 = n_rej + 1
    acc = np.zeros(n_sub)
    rank = np.zeros(n_sub, dtype=np.int64)
    last = np.zeros(n_sub, dtype=np.int64)
    if kind == "reset":
        gv = g.values(n + 1)
    elif kind == "gap":
        G = g.prefix_values(n + 1)
    elif kind == "calibrated-reset":
        gv = g.values(n + 1)
        ell = harmonic_values(n + 1)
        w = np.array([[scaled_calibrated(x[i], k, gv[k - 1], ell[k - 1], delta) for i in range(n)]
                      for k in range(1, n + 1)]) if n else np.zeros((0, 0))
    else:
        raise DomainError(f"unknown e-collection kind {kind!r}")
    for i in range(n):
        m = masks[:, i]
        ind = 1.0 if in_r[i] else 0.0
        rank = rank + m
        if kind == "reset":
            term = ind - c * gv[np.maximum(rank, 1) - 1] * x[i]
        elif kind == "gap":
            term = ind - c * (G[i + 1] - G[last]) * x[i]
            last = np.where(m, i + 1, last)
        else:
            term = ind - r1 * w[np.maximum(rank, 1) - 1, i]
        acc = acc + np.where(m, term, 0.0)
    return acc, rank, last


def brute_closure_level(t, history, kind, delta, rejected, gamma="default", budget=DEFAULT_BUDGET):
    """Closed test level at time ``t`` by minimizing over every ``S`` in ``2^[t-1]``.

    ``kind`` selects the collection: ``reset`` (closed e-LOND), ``gap``
    (alternative weighting) or ``calibrated-reset`` (closed r-LOND, where
    ``history`` holds p-values and the level is capped at 1). Subsets whose
    denominator is not positive impose no constraint; if none remain the
    e-value level is ``inf``.
    """
    delta = check_delta(delta)
    if t < 1:
        raise DomainError("t must be >= 1")
    if t > budget.max_t_exhaustive:
        raise CapabilityError(f"t={t} exceeds exhaustive budget {budget.max_t_exhaustive}")
    g = as_gamma(gamma)
    n = t - 1
    x = np.asarray(history, dtype=float)[:n]
    in_r = np.zeros(n, dtype=bool)
    for i in rejected:
        if not 1 <= i <= n:
            raise DomainError(f"rejected index {i} outside [1, {n}]")
        in_r[i - 1] = True
    n_rej = int(in_r.sum())
    masks = _subset_masks(n)
    acc, size, last = _subset_gains(kind, masks, x, in_r, n_rej, delta, g)
    den = 1.0 + acc
    live = den > 0.0
    if kind == "reset":
        gv = g.values(t)
        vals = delta * gv[size[live]] * (n_rej + 1) / den[live]
        return float(vals.min()) if vals.size else math.inf
    if kind == "gap":
        G = g.prefix_values(t)
        vals = delta * (G[t] - G[last[live]]) * (n_rej + 1) / den[live]
        return float(vals.min()) if vals.size else math.inf
    gv = g.values(t)
    ell = harmonic_values(t)
    k = size[live]
    q = (n_rej + 1) / den[live]
    fl = np.floor(np.minimum(q, k + 1.0))
    vals = delta * gv[k] / ell[k] * fl
    return float(min(1.0, vals.min())) if vals.size else 1.0


def naive_wealth(t, gammas, evalues, rejected, delta):
    """Donation wealth at time ``t`` summed directly over hypotheses ``1..t-1``.

    ``sum_{i in R} min(gamma_i E_i - 1/(delta (|R|+1)), gamma_i)
    + sum_{i < t, i not in R} gamma_i (E_i ^ 1)``.
    """
    n = max(t - 1, 0)
    g = np.asarray(gammas, dtype=float)[:n]
    e = np.asarray(evalues, dtype=float)[:n]
    in_r = np.zeros(n, dtype=bool)
    idx = np.asarray(sorted(set(int(i) for i in rejected)), dtype=np.int64)
    idx = idx[idx < t]
    in_r[idx - 1] = True
    c = 1.0 / (delta * (len(idx) + 1))
    rej = np.minimum(g * e - c, g)[in_r].sum()
    unr = (g * np.minimum(e, 1.0))[~in_r].sum()
    return float(rej + unr)


def _sorted_pairs(items):
    pairs = [(float(g), float(e)) for g, e in items]
    order = sorted(range(len(pairs)), key=lambda j: (-(pairs[j][0] * pairs[j][1]), j))
    return [pairs[j] for j in order]


def brute_r_scan(items, delta, mode, context=None, budget=DEFAULT_BUDGET):
    """Largest rank satisfying the defining predicate of an e-BH-type rule.

    Parameters
    ----------
    items : sequence of (gamma, E)
        The hypotheses eligible for rejection (the active set for the
        deadline modes).
    mode : {"ebh", "donation-ebh", "etoad", "donation-etoad"}
    context : dict, optional
        For the deadline modes: ``passed_rejected`` and ``passed_unrejected``,
        lists of ``(gamma, E)`` for hypotheses whose deadline has passed.
    """
    delta = check_delta(delta)
    if len(items) > budget.max_t_scan:
        raise CapabilityError(f"{len(items)} items exceed scan budget {budget.max_t_scan}")
    ctx = context or {}
    pr = [(float(g), float(e)) for g, e in ctx.get("passed_rejected", ())]
    pu = [(float(g), float(e)) for g, e in ctx.get("passed_unrejected", ())]
    srt = _sorted_pairs(items)
    n = len(srt)
    if mode in ("ebh", "donation-ebh"):
        k, lo = 0, 1
    elif mode in ("etoad", "donation-etoad"):
        k = len(pr)
        lo = k
    else:
        raise DomainError(f"unknown scan mode {mode!r}")
    best = 0
    for r in range(lo, k + n + 1):
        j = r - k
        if mode in ("ebh", "etoad"):
            if r == 0:
                ok = True
            else:
                cnt = sum(1 for g, e in srt if g * e >= 1.0 / (delta * r))
                ok = cnt >= j
        else:
            if r == 0:
                c = math.inf
            else:
                c = 1.0 / (delta * r)
            total = 0.0
            for idx, (g, e) in enumerate(srt):
                total += min(g * e - c, g) if idx < j else g * min(e, 1.0)
            for g, e in pr:
                total += min(g * e - c, g)
            for g, e in pu:
                total += g * min(e, 1.0)
            ok = total >= 0.0
        if ok:
            best = r
    return best


def self_consistency_check(R, gammas, e_tilde, delta):
    """Whether ``gamma_i E~_i >= 1 / (delta |R|)`` for every ``i`` in ``R``.

    ``gammas`` and ``e_tilde`` are indexed by hypothesis (1-based positions).
    """
    delta = check_delta(delta)
    r = sorted(set(int(i) for i in R))
    if not r:
        return True
    size = len(r)
    for i in r:
        g, e = float(gammas[i - 1]), float(e_tilde[i - 1])
        if g == 0.0:
            if not math.isinf(e):
                return False
            continue
        if not e >= 1.0 / (delta * g * size):
            return False
    return True


def has_self_consistent_set(gammas, e_tilde, delta):
    """Whether some nonempty weighted self-consistent set exists.

    The largest such set, if any, consists of the ``r`` largest
    ``gamma_i E~_i`` for the largest feasible ``r``, so a rank scan suffices.
    """
    x = np.sort(np.asarray(gammas, float) * np.asarray(e_tilde, float))[::-1]
    return any(x[r - 1] >= 1.0 / (delta * r) for r in range(1, x.size + 1))
