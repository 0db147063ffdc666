"""Donation procedures built on gamma-weighted compound e-values."""

import logging
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state

from . import _kernels
from .base import OnlineProcedure, e_threshold
from .baselines import ETOAD, _SortedProducts
from .calibration import calibrate_p
from .core import ConfigError, DomainError, harmonic
from .ledger import WealthLedger
from .validation import check_delta, check_evalues

log = logging.getLogger(__name__)


def _wealth_fraction(n_rejections, delta, wealth):
    return min(delta * (n_rejections + 1) * wealth, 1.0)


def donation_elond_level(n_rejections, gamma_t, delta, wealth):
    """``delta gamma_t (|R|+1) / (1 - (delta (|R|+1) W ^ 1))``; ``inf`` once the cap binds."""
    x = _wealth_fraction(n_rejections, delta, wealth)
    if x >= 1.0:
        return math.inf
    return delta * gamma_t * (n_rejections + 1) / (1.0 - x)


def donation_rlond_level(n_rejections, t, gamma_t, delta, wealth):
    """Donation r-LOND level, capped at 1.

    When the wealth term saturates the matching e-value level is infinite
    (reject regardless of evidence), so the p-value level is set to 1.
    """
    x = _wealth_fraction(n_rejections, delta, wealth)
    if x >= 1.0:
        return 1.0
    count = min(math.floor((n_rejections + 1) / (1.0 - x)), t)
    return min(1.0, delta * gamma_t / harmonic(t) * count)


class _LedgerProcedure(OnlineProcedure):
    def _init_state(self):
        self.ledger_ = WealthLedger()
        self.negative_wealth_steps_ = 0

    def _current_wealth(self):
        r1 = len(self._rejected) + 1
        w = self.ledger_.wealth(1.0 / (self.delta_ * r1))
        if w < 0.0:
            self.negative_wealth_steps_ += 1
            log.warning("negative donation wealth %.3g at t=%d", w, self.t_ + 1)
        return w

    def _settle(self, t, g, stored, alpha, reject, wealth):
        if reject:
            self.ledger_.insert(t, g, stored)
        else:
            self.ledger_.add_unrejected(t, g, stored)
        self._commit(alpha, (t,) if reject else (), wealth)


class DonationELOND(_LedgerProcedure):
    """Donation e-LOND: e-LOND levels inflated by the donatable wealth of past e-values.

    Each step costs ``O(log t)`` through :class:`~supfdr.ledger.WealthLedger`.
    ``wealth_`` records the wealth used at each step.
    """

    def _step(self, e, deadline):
        t = self.t_ + 1
        g = self.gamma_(t)
        w = self._current_wealth()
        alpha = donation_elond_level(len(self._rejected), g, self.delta_, w)
        self._settle(t, g, e, alpha, e >= e_threshold(alpha), w)


class DonationRLOND(_LedgerProcedure):
    """Donation r-LOND: the wealth is built from calibrated p-values ``f_i(P_i)``."""

    evidence = "p"

    def _step(self, p, deadline):
        t = self.t_ + 1
        g = self.gamma_(t)
        w = self._current_wealth()
        alpha = donation_rlond_level(len(self._rejected), t, g, self.delta_, w)
        self._settle(t, g, calibrate_p(p, t, g, self.delta_), alpha, p <= alpha, w)


def restricted_round(x, alpha_hat, u):
    """Restricted stochastic rounding of ``x`` at level ``alpha_hat`` with draw ``u``.

    Values at most 1 or at least ``1/alpha_hat`` pass through; in between the
    excess over 1 is rounded to ``1/alpha_hat - 1`` or to 0. ``alpha_hat >= 1``
    is the identity.
    """
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"uniform draw must lie in [0, 1], got {u}")
    if alpha_hat >= 1.0:
        return x
    if not alpha_hat > 0.0:
        raise DomainError(f"rounding level must lie in (0, 1), got {alpha_hat}")
    if x <= 1.0 or x >= 1.0 / alpha_hat:
        return x
    hit = u <= alpha_hat * (x - 1.0) / (1.0 - alpha_hat)
    return 1.0 + (1.0 / alpha_hat - 1.0) if hit else 1.0


def stochastic_round(x, alpha_hat, u):
    """Plain stochastic rounding ``1{u <= alpha_hat x} / alpha_hat``."""
    if not 0.0 < alpha_hat <= 1.0:
        raise DomainError(f"rounding level must lie in (0, 1], got {alpha_hat}")
    return 1.0 / alpha_hat if u <= alpha_hat * x else 0.0


def randomized_level(alpha_hat, u):
    """Effective level ``alpha_hat / (u (1 - alpha_hat) + alpha_hat)``."""
    if alpha_hat >= 1.0 or alpha_hat <= 0.0:
        return alpha_hat
    return alpha_hat / (u * (1.0 - alpha_hat) + alpha_hat)


class RandomizedDonationELOND(_LedgerProcedure):
    """Donation e-LOND on restricted-stochastically-rounded e-values.

    One uniform is drawn per step, whether or not it affects the decision.
    The ledger stores the rounded value of each rejected e-value.

    Parameters
    ----------
    random_state : int, numpy Generator or RandomState
        Source of the external uniforms; required.
    """

    def __init__(self, delta=0.1, gamma="default", random_state=None):
        super().__init__(delta=delta, gamma=gamma)
        self.random_state = random_state

    def _init_state(self):
        super()._init_state()
        if self.random_state is None:
            raise ConfigError("randomized donation e-LOND needs a random_state")
        if isinstance(self.random_state, np.random.Generator):
            self._draw = self.random_state.random
        else:
            self._draw = check_random_state(self.random_state).random_sample
        self._u = []
        self.uniforms_ = self._u

    def _step(self, e, deadline):
        t = self.t_ + 1
        g = self.gamma_(t)
        w = self._current_wealth()
        a_hat = donation_elond_level(len(self._rejected), g, self.delta_, w)
        u = float(self._draw())
        self._u.append(u)
        alpha = randomized_level(a_hat, u)
        reject = e >= e_threshold(alpha)
        stored = restricted_round(e, a_hat, u) if reject and 0.0 < a_hat < 1.0 else e
        self._settle(t, g, stored, alpha, reject, w)


# -- online e-BH family ---------------------------------------------------


def _donation_feasible(A, extra=None):
    """Largest ``j >= 1`` with ``A[j] (+ extra[j]) >= 0``, or 0."""
    tot = A if extra is None else A + extra
    ok = np.flatnonzero(tot[1:] >= 0.0)
    return int(ok[-1]) + 1 if ok.size else 0


def donation_rank(gammas, evalues, delta, passed_rejected=(), passed_unrejected=()):
    """Donation e-TOAD rank ``r_t`` for one snapshot.

    ``gammas``/``evalues`` describe the active hypotheses in arrival order;
    ``passed_rejected`` and ``passed_unrejected`` are ``(gamma, E)`` pairs of
    hypotheses whose deadline has passed. Without passed hypotheses this is
    the donation online e-BH rank. Returns ``(r, order)`` with ``order`` the
    active positions sorted by decreasing ``gamma E`` (ties by arrival).
    """
    delta = check_delta(delta)
    g = np.asarray(gammas, dtype=float)
    e = np.asarray(evalues, dtype=float)
    x = g * e
    order = np.argsort(-x, kind="stable")
    ledger = WealthLedger()
    for j, (gi, ei) in enumerate(passed_rejected):
        ledger.insert(-1 - j, gi, ei)
    for j, (gi, ei) in enumerate(passed_unrejected):
        ledger.add_unrejected(-10**9 - j, gi, ei)
    k = len(passed_rejected)
    r = _rank_from_sorted(x[order], g[order], (g * np.minimum(e, 1.0))[order], k, delta, ledger)
    return r, order


def _rank_from_sorted(xs, gs, caps, k, delta, ledger):
    n = xs.size
    A = _kernels.donation_prefix_scan(xs, gs, caps, k, delta)
    if k == 0 and len(ledger) == 0:
        extra = np.full(n + 1, ledger.unrejected_mass)
    else:
        extra = np.array(
            [ledger.wealth(1.0 / (delta * (k + j))) if k + j > 0 else ledger.unrejected_mass
             for j in range(n + 1)]
        )
    j = _donation_feasible(A, extra)
    if j == 0 and A[0] + extra[0] < 0.0:
        return 0
    return k + j


class DonationOnlineEBH(OnlineProcedure):
    """Online donation e-BH in the acceptance-to-rejection setting.

    ``r_t`` is the largest rank whose donated compound e-values are weighted
    self-consistent; the ``r_t`` largest ``gamma_i E_i`` are added to the
    rejection set, which stays nested. ``O(t log t)`` per step.
    """

    def _init_state(self):
        self._sorted = _SortedProducts()
        self._g = []
        self._cap = []
        self._r = 0

    def _step(self, e, deadline):
        t = self.t_ + 1
        g = self.gamma_(t)
        self._g.append(g)
        self._cap.append(g * min(e, 1.0))
        self._sorted.insert(t, g * e)
        pos = self._sorted.ids - 1
        A = _kernels.donation_prefix_scan(
            self._sorted.values, np.asarray(self._g)[pos], np.asarray(self._cap)[pos], 0, self.delta_
        )
        self._r = _donation_feasible(A)
        top = self._sorted.ids[: self._r].tolist()
        new = [i for i in top if i == t or self._rej_time[i - 1] == 0]
        self._commit(math.nan, new)

    @property
    def r_(self):
        return self._r


class DonationETOAD(ETOAD):
    """Donation e-TOAD: e-TOAD with wealth donated from expired hypotheses too.

    Expired rejections enter a :class:`~supfdr.ledger.WealthLedger`; expired
    non-rejections contribute ``gamma_i (E_i ^ 1)``.
    """

    def _init_state(self):
        super()._init_state()
        self.ledger_ = WealthLedger()

    def _on_expire(self, i):
        g, e = self._g[i - 1], self._e[i - 1]
        if self._rej_time[i - 1] > 0:
            self.ledger_.insert(i, g, e)
        else:
            self.ledger_.add_unrejected(i, g, e)

    def _rank(self, k):
        pos = self._active.ids - 1
        g = np.asarray(self._g)[pos]
        e = np.asarray(self._e)[pos]
        return _rank_from_sorted(
            self._active.values, g, g * np.minimum(e, 1.0), k, self.delta_, self.ledger_
        )


# -- offline ---------------------------------------------------------------


def donation_ebh_offline(e_values, delta):
    """Offline donation e-BH with ``gamma_i = 1/m``; rejected 1-based indices, sorted.

    The rank condition is evaluated for every ``r`` with cumulative sums over
    the sorted e-values, ``O(m log m)`` in total.
    """
    delta = check_delta(delta)
    e = check_evalues(e_values)
    m = e.size
    if m == 0:
        return []
    order = np.argsort(-e, kind="stable")
    es = e[order]
    x = es / m
    g = 1.0 / m
    cap = np.minimum(es, 1.0) / m
    r = np.arange(1, m + 1)
    c = 1.0 / (delta * r)
    # keys (E - 1)/m are descending, so those above c form a prefix of length s
    asc_keys = ((es - 1.0) / m)[::-1]
    s = m - np.searchsorted(asc_keys, c, side="right")
    s = np.minimum(s, r)
    cx = np.concatenate([[0.0], np.cumsum(x)])
    ccap = np.concatenate([[0.0], np.cumsum(cap)])
    lo = (cx[r] - cx[s]) - c * (r - s)
    F = lo + g * s + (ccap[m] - ccap[r])
    ok = np.flatnonzero(F >= 0.0)
    if not ok.size:
        return []
    k = int(ok[-1]) + 1
    return np.sort(order[:k] + 1).tolist()


class DonationEBH(BaseEstimator):
    """Offline donation e-BH as an estimator; ``fit`` sets ``rejected_`` (boolean mask)."""

    def __init__(self, delta=0.1):
        self.delta = delta

    def fit(self, X, y=None):
        e = check_evalues(X)
        mask = np.zeros(e.size, dtype=bool)
        mask[np.asarray(donation_ebh_offline(e, self.delta), dtype=int) - 1] = True
        self.rejected_ = mask
        self.n_rejections_ = int(mask.sum())
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).rejected_
