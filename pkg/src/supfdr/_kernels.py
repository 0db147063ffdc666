"""Compiled inner loops: closure dynamic programs and the donation rank scan."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def closed_elond_level(e, gam, in_r, n_rej, delta):
    """C-eLOND level at ``t = len(e) + 1`` by the max-over-size recursion.

    ``v[k]`` holds ``max_{|S|=k, S in [i]} |S & R| - delta (|R|+1) E_S`` for the
    reset collection; one row updated in place with ``k`` descending.
    ``gam`` must hold ``gamma_1 .. gamma_t``.
    """
    n = e.shape[0]
    c = delta * (n_rej + 1)
    v = np.full(n + 1, -np.inf)
    v[0] = 0.0
    for i in range(n):
        ind = 1.0 if in_r[i] else 0.0
        ei = e[i]
        for k in range(i + 1, 0, -1):
            cand = v[k - 1] + (ind - c * gam[k - 1] * ei)
            if cand > v[k]:
                v[k] = cand
    best = np.inf
    for k in range(n + 1):
        den = 1.0 + v[k]
        if den > 0.0:
            a = delta * gam[k] * (n_rej + 1) / den
            if a < best:
                best = a
    return best


@njit(cache=True)
def closed_elond_alt_level(e, gprefix, in_r, n_rej, delta):
    """Gap-weighted C-eLOND level at ``t = len(e) + 1``.

    ``best[j]`` is the largest ``|S & R| - delta (|R|+1) E_S`` over sets whose
    last element is ``j`` (``best[0] = 0`` for the empty set). ``gprefix`` holds
    ``G_0 .. G_t`` with ``G_j = sum_{l <= j} gamma_l``.
    """
    n = e.shape[0]
    t = n + 1
    c = delta * (n_rej + 1)
    best = np.empty(n + 1)
    best[0] = 0.0
    for j in range(1, n + 1):
        ind = 1.0 if in_r[j - 1] else 0.0
        ej = e[j - 1]
        b = -np.inf
        for prev in range(j):
            cand = best[prev] + (ind - c * (gprefix[j] - gprefix[prev]) * ej)
            if cand > b:
                b = cand
        best[j] = b
    alpha = np.inf
    for j in range(n + 1):
        den = 1.0 + best[j]
        if den > 0.0:
            a = delta * (gprefix[t] - gprefix[j]) * (n_rej + 1) / den
            if a < alpha:
                alpha = a
    return alpha


@njit(cache=True)
def scaled_calibrated(p, k, gamma_k, ell_k, delta):
    if gamma_k <= 0.0:
        return 0.0
    if not p <= delta * gamma_k * k / ell_k:
        return 0.0
    return 1.0 / math.ceil(max(p * ell_k / (delta * gamma_k), 1.0))


@njit(cache=True)
def closed_rlond_level(p, gam, ell, in_r, n_rej, delta, restrict):
    """Closed r-LOND level at ``t = len(p) + 1``.

    Transition term for placing hypothesis ``i`` at rank ``k`` is
    ``1{i in R} - (|R|+1) 1{P_i <= delta gamma_k k / ell_k} / ceil(...)``.
    With ``restrict`` only indices in ``R`` enter the recursion.
    """
    n = p.shape[0]
    r1 = n_rej + 1
    g = np.full(n + 1, -np.inf)
    g[0] = 0.0
    top = 0
    for i in range(n):
        if restrict and not in_r[i]:
            continue
        ind = 1.0 if in_r[i] else 0.0
        pi = p[i]
        top += 1
        for k in range(top, 0, -1):
            w = scaled_calibrated(pi, k, gam[k - 1], ell[k - 1], delta)
            cand = g[k - 1] + (ind - r1 * w)
            if cand > g[k]:
                g[k] = cand
    alpha = 1.0
    for k in range(n + 1):
        den = 1.0 + g[k]
        if den > 0.0:
            q = r1 / den
            cap = k + 1.0
            fl = math.floor(q if q < cap else cap)
            a = delta * gam[k] / ell[k] * fl
            if a < alpha:
                alpha = a
    return alpha


@njit(cache=True)
def _fen_add(tree, pos, val):
    n = tree.shape[0] - 1
    while pos <= n:
        tree[pos] += val
        pos += pos & (-pos)


@njit(cache=True)
def _fen_sum(tree, pos):
    s = 0.0
    while pos > 0:
        s += tree[pos]
        pos -= pos & (-pos)
    return s


@njit(cache=True)
def donation_prefix_scan(x, g, capped, offset, delta):
    """Donation sums for every split of a descending ``gamma E`` ordering.

    Returns ``A`` with, for ``j = 0..n`` and ``c = 1 / (delta (offset + j))``,
    ``A[j] = sum_{i <= j} min(x_i - c, g_i) + sum_{i > j} capped_i``.
    The first sum splits on the key ``x_i - g_i <= c``, answered with Fenwick
    trees over key rank, so the whole scan is ``O(n log n)``.
    """
    n = x.shape[0]
    keys = x - g
    order = np.argsort(keys, kind="mergesort")
    sorted_keys = keys[order]
    rank = np.empty(n, dtype=np.int64)
    for pos in range(n):
        rank[order[pos]] = pos + 1
    cnt = np.zeros(n + 1)
    sx = np.zeros(n + 1)
    sg = np.zeros(n + 1)
    suffix = np.zeros(n + 1)
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] + capped[j]
    out = np.empty(n + 1)
    out[0] = suffix[0]
    g_in = 0.0
    for j in range(1, n + 1):
        i = j - 1
        _fen_add(cnt, rank[i], 1.0)
        _fen_add(sx, rank[i], x[i])
        _fen_add(sg, rank[i], g[i])
        g_in += g[i]
        c = 1.0 / (delta * (offset + j))
        m = np.searchsorted(sorted_keys, c, side="right")
        n_lo = _fen_sum(cnt, m)
        lo = _fen_sum(sx, m) - c * n_lo
        hi = g_in - _fen_sum(sg, m)
        out[j] = lo + hi + suffix[j]
    return out
