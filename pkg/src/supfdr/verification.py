"""Randomized fast-path versus oracle checks behind ``supfdr verify``."""

import math

import numpy as np

from . import _kernels
from .closure import ClosedELOND, ClosedELONDAlt, ClosedRLOND
from .core import as_gamma, harmonic_values, is_close
from .donation import DonationELOND, donation_ebh_offline, donation_rank
from .oracles import brute_closure_level, brute_r_scan, naive_wealth
from .baselines import ebh_count


def mixed_evalues(rng, n, pi1=0.3, mu=3.0):
    """Gaussian likelihood-ratio e-values with a random non-null fraction."""
    x = rng.standard_normal(n) + mu * (rng.random(n) < pi1)
    return np.exp(mu * x - mu * mu / 2)


def mixed_pvalues(rng, n, pi1=0.3, scale=0.02):
    """Uniform nulls mixed with small non-null p-values."""
    p = rng.random(n)
    hit = rng.random(n) < pi1
    p[hit] = rng.random(hit.sum()) * scale
    return p


def closure_levels(kind, x, in_r, delta, gamma="default", restrict=False):
    """Fast closed level at ``t = len(x) + 1`` for one history."""
    g = as_gamma(gamma)
    t = len(x) + 1
    x = np.ascontiguousarray(x, dtype=float)
    in_r = np.ascontiguousarray(in_r, dtype=np.bool_)
    n_rej = int(in_r.sum())
    if kind == "reset":
        return _kernels.closed_elond_level(x, np.ascontiguousarray(g.values(t)), in_r, n_rej, delta)
    if kind == "gap":
        return _kernels.closed_elond_alt_level(x, np.ascontiguousarray(g.prefix_values(t)), in_r, n_rej, delta)
    return _kernels.closed_rlond_level(x, np.ascontiguousarray(g.values(t)), harmonic_values(t),
                                       in_r, n_rej, delta, restrict)


def _closure_check(rng, n, t_max):
    worst = 0.0
    for _ in range(n):
        t = int(rng.integers(1, t_max + 1))
        for kind, cls in (("reset", ClosedELOND), ("gap", ClosedELONDAlt), ("calibrated-reset", ClosedRLOND)):
            data = mixed_pvalues(rng, t) if kind == "calibrated-reset" else mixed_evalues(rng, t)
            est = cls(delta=0.1).fit(data[:-1])
            fast = est._level(t)
            slow = brute_closure_level(t, data, kind, 0.1, est.rejected_)
            if not is_close(fast, slow, rel=1e-9):
                return False, f"{kind} t={t}: dp={fast!r} brute={slow!r}"
            if math.isfinite(slow) and slow > 0:
                worst = max(worst, abs(fast - slow) / slow)
    return True, f"{n} histories per collection, max rel. error {worst:.2e}"


def _ledger_check(rng, length):
    e = mixed_evalues(rng, length)
    est = DonationELOND(delta=0.1).fit(e)
    g = est.gamma_.values(length)
    rt = est.rejection_time_
    worst = 0.0
    for t in range(1, length + 1):
        rej = [i + 1 for i in np.flatnonzero((rt > 0) & (rt < t))]
        slow = naive_wealth(t, g, e, rej, 0.1)
        fast = est.wealth_[t - 1]
        if not math.isclose(fast, slow, rel_tol=1e-9, abs_tol=1e-12):
            return False, f"t={t}: ledger={fast!r} naive={slow!r}"
        worst = max(worst, abs(fast - slow))
    return True, f"{length} steps, max abs. error {worst:.2e}"


def _rank_check(rng, n):
    for _ in range(n):
        m = int(rng.integers(1, 30))
        g = rng.random(m) / m
        e = mixed_evalues(rng, m) * rng.choice([1.0, 20.0], size=m)
        delta = float(rng.choice([0.1, 0.2, 0.5]))
        k = int(rng.integers(0, 4))
        pr = [(float(a), float(b)) for a, b in zip(rng.random(k) / 5, mixed_evalues(rng, k) * 30)]
        pu = [(float(a), float(b)) for a, b in zip(rng.random(3) / 5, mixed_evalues(rng, 3))]
        items = list(zip(g, e))
        x = np.sort(g * e)[::-1]
        if ebh_count(x, delta) != brute_r_scan(items, delta, "ebh"):
            return False, "online e-BH rank disagrees"
        if donation_rank(g, e, delta)[0] != brute_r_scan(items, delta, "donation-ebh"):
            return False, "donation e-BH rank disagrees"
        ctx = {"passed_rejected": pr, "passed_unrejected": pu}
        fast = k + ebh_count(x, delta, offset=k)
        if fast != brute_r_scan(items, delta, "etoad", ctx):
            return False, "e-TOAD rank disagrees"
        if donation_rank(g, e, delta, pr, pu)[0] != brute_r_scan(items, delta, "donation-etoad", ctx):
            return False, "donation e-TOAD rank disagrees"
        off = donation_ebh_offline(e, delta)
        if len(off) != brute_r_scan([(1.0 / m, v) for v in e], delta, "donation-ebh"):
            return False, "offline donation e-BH size disagrees"
    return True, f"{n} random instances, all ranks equal"


def run_checks(seed=0, n=20):
    """Yield ``(name, passed, detail)`` for each oracle cross-check."""
    rng = np.random.default_rng(seed)
    yield ("closure-dp", *_closure_check(rng, n, 12))
    yield ("ledger-wealth", *_ledger_check(rng, 2000))
    yield ("rank-scans", *_rank_check(rng, max(n, 1) * 5))
