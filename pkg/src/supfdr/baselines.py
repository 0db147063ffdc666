"""Reference procedures: e-LOND, r-LOND, online e-BH, e-TOAD and offline e-BH."""

import heapq
import math

import numpy as np
from sklearn.base import BaseEstimator

from .base import OnlineProcedure, e_threshold
from .calibration import reshape_beta
from .validation import check_delta, check_evalues


def elond_level(n_rejections, gamma_t, delta, plus_one=False):
    """e-LOND test level ``delta gamma_t (|R| v 1)``.

    With ``plus_one=True`` the count is ``|R| + 1``, the level that e-TOAD
    reduces to when every deadline equals the arrival time.
    """
    count = n_rejections + 1 if plus_one else max(n_rejections, 1)
    return delta * gamma_t * count


def rlond_level(n_rejections, t, gamma_t, delta):
    """r-LOND test level ``delta gamma_t beta_t(|R| v 1)``, capped at 1."""
    return min(1.0, delta * gamma_t * reshape_beta(max(n_rejections, 1), t))


class ELOND(OnlineProcedure):
    """e-LOND: reject ``E_t >= 1 / (delta gamma_t (|R_{t-1}| v 1))``."""

    def __init__(self, delta=0.1, gamma="default", plus_one=False):
        super().__init__(delta=delta, gamma=gamma)
        self.plus_one = plus_one

    def _step(self, e, deadline):
        t = self.t_ + 1
        alpha = elond_level(len(self._rejected), self.gamma_(t), self.delta_, self.plus_one)
        self._commit(alpha, (t,) if e >= e_threshold(alpha) else ())


class RLOND(OnlineProcedure):
    """r-LOND for arbitrarily dependent p-values (harmonic reshaping)."""

    evidence = "p"

    def _step(self, p, deadline):
        t = self.t_ + 1
        alpha = rlond_level(len(self._rejected), t, self.gamma_(t), self.delta_)
        self._commit(alpha, (t,) if p <= alpha else ())


class _SortedProducts:
    """``gamma_i E_i`` of a set of hypotheses kept in descending order.

    Ties are ordered by arrival, earlier index first.
    """

    def __init__(self):
        self.neg = np.empty(0)
        self.ids = np.empty(0, dtype=np.int64)

    def __len__(self):
        return self.ids.size

    def insert(self, i, x):
        pos = int(np.searchsorted(self.neg, -x, side="right"))
        self.neg = np.insert(self.neg, pos, -x)
        self.ids = np.insert(self.ids, pos, i)

    def remove(self, i):
        pos = int(np.flatnonzero(self.ids == i)[0])
        self.neg = np.delete(self.neg, pos)
        self.ids = np.delete(self.ids, pos)

    @property
    def values(self):
        return -self.neg


def ebh_count(x_sorted, delta, offset=0):
    """Largest ``j`` with ``x_(j) >= 1 / (delta (offset + j))``; 0 if none.

    ``x_sorted`` is in descending order. The predicate is not monotone in
    ``j`` so every rank is checked.
    """
    n = x_sorted.size
    if n == 0:
        return 0
    ranks = offset + np.arange(1, n + 1)
    ok = np.flatnonzero(x_sorted >= 1.0 / (delta * ranks))
    return int(ok[-1]) + 1 if ok.size else 0


class OnlineEBH(OnlineProcedure):
    """Online e-BH for the acceptance-to-rejection setting.

    At each step ``r_t = max{r : #{i : gamma_i E_i >= 1/(delta r)} >= r}``
    and the rejection set is every hypothesis clearing ``1/(delta r_t)``.
    Earlier acceptances may be converted into rejections later on.
    """

    def _init_state(self):
        self._sorted = _SortedProducts()
        self._r = 0

    def _step(self, e, deadline):
        t = self.t_ + 1
        self._sorted.insert(t, self.gamma_(t) * e)
        self._r = ebh_count(self._sorted.values, self.delta_)
        new = [int(i) for i in self._sorted.ids[: self._r] if i == t or self._rej_time[i - 1] == 0]
        self._commit(math.nan, new)

    @property
    def r_(self):
        return self._r


class ETOAD(OnlineProcedure):
    """e-TOAD: online e-BH restricted by per-hypothesis decision deadlines.

    Hypothesis ``i`` stays active while ``d_i >= t``; once its deadline
    passes it can no longer be rejected. ``d_i = i`` gives the ``|R| + 1``
    e-LOND level and ``d_i = inf`` gives online e-BH.
    """

    uses_deadlines = True

    def _init_state(self):
        self._active = _SortedProducts()
        self._expiry = []
        self._passed_rejected = 0
        self._g = []
        self._e = []
        self._r = 0

    def _expire(self, t):
        while self._expiry and self._expiry[0][0] < t:
            _, i = heapq.heappop(self._expiry)
            self._active.remove(i)
            if self._rej_time[i - 1] > 0:
                self._passed_rejected += 1
            self._on_expire(i)

    def _on_expire(self, i):
        pass

    def _rank(self, k):
        """Total discoveries ``r_t`` given ``k`` rejections whose deadline passed."""
        return k + ebh_count(self._active.values, self.delta_, offset=k)

    def _step(self, e, deadline):
        t = self.t_ + 1
        self._expire(t)
        g = self.gamma_(t)
        self._g.append(g)
        self._e.append(e)
        self._active.insert(t, g * e)
        if deadline != math.inf:
            heapq.heappush(self._expiry, (deadline, t))
        k = self._passed_rejected
        r = self._rank(k)
        top = self._active.ids[: max(r - k, 0)].tolist()
        new = [i for i in top if i == t or self._rej_time[i - 1] == 0]
        self._r = r
        self._commit(math.nan, new)

    @property
    def r_(self):
        return self._r


def ebh_offline(e_values, delta):
    """Offline e-BH; returns the rejected 1-based indices in increasing order."""
    delta = check_delta(delta)
    e = check_evalues(e_values)
    m = e.size
    if m == 0:
        return []
    srt = np.sort(e)[::-1]
    ranks = np.arange(1, m + 1)
    ok = np.flatnonzero(srt >= m / (delta * ranks))
    if not ok.size:
        return []
    r = int(ok[-1]) + 1
    return (np.flatnonzero(e >= m / (delta * r)) + 1).tolist()


class EBH(BaseEstimator):
    """Offline e-BH as an estimator; ``fit`` sets ``rejected_`` (boolean mask)."""

    def __init__(self, delta=0.1):
        self.delta = delta

    def fit(self, X, y=None):
        e = check_evalues(X)
        mask = np.zeros(e.size, dtype=bool)
        mask[np.asarray(ebh_offline(e, self.delta), dtype=int) - 1] = True
        self.rejected_ = mask
        self.n_rejections_ = int(mask.sum())
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).rejected_
