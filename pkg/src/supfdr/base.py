"""Estimator scaffolding shared by every sequential procedure."""

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import RejectionRecord, as_gamma
from .validation import check_deadlines, check_delta, check_evalues, check_pvalues


def e_threshold(alpha):
    """Rejection cutoff ``1 / alpha`` for e-values; ``alpha = inf`` gives 0."""
    if alpha == math.inf:
        return 0.0
    if alpha <= 0.0:
        return math.inf
    return 1.0 / alpha


class OnlineProcedure(BaseEstimator):
    """Base class for streaming procedures with nested rejection sets.

    Subclasses implement ``_step(x, deadline)`` which consumes the evidence
    of hypothesis ``self.t_ + 1`` and must call :meth:`_commit` exactly once.

    Fitted attributes
    -----------------
    t_ : int
        Number of hypotheses processed.
    rejection_time_ : ndarray of int
        Step at which each hypothesis was rejected, 0 if never.
    alpha_ : ndarray
        Test level used at each step (NaN for procedures without one).
    """

    evidence = "e"
    uses_deadlines = False

    def __init__(self, delta=0.1, gamma="default"):
        self.delta = delta
        self.gamma = gamma

    # -- state -------------------------------------------------------------
    def _reset(self):
        self.delta_ = check_delta(self.delta)
        self.gamma_ = as_gamma(self.gamma)
        self.t_ = 0
        self._rej_time = []
        self._alphas = []
        self._wealth = []
        self._n_rej = []
        self._rejected = []
        self._init_state()

    def _init_state(self):
        pass

    def _commit(self, alpha, new_rejections, wealth=math.nan):
        """Close step ``t_ + 1``: record its level and the newly rejected indices."""
        self.t_ += 1
        self._rej_time.append(0)
        for i in new_rejections:
            self._rej_time[i - 1] = self.t_
            self._rejected.append(i)
        self._alphas.append(alpha)
        self._wealth.append(wealth)
        self._n_rej.append(len(self._rejected))

    # -- public API --------------------------------------------------------
    def _check_X(self, X):
        return check_pvalues(X) if self.evidence == "p" else check_evalues(X)

    def partial_fit(self, X, y=None, deadlines=None):
        """Feed further hypotheses, continuing the current stream."""
        if not hasattr(self, "t_"):
            self._reset()
        X = self._check_X(X)
        d = check_deadlines(deadlines, self.t_, X.size) if self.uses_deadlines else None
        for j, x in enumerate(X.tolist()):
            self._step(x, None if d is None else d[j])
        return self

    def fit(self, X, y=None, deadlines=None):
        """Run the procedure on a fresh stream ``X``."""
        self._reset()
        return self.partial_fit(X, deadlines=deadlines)

    def step(self, x, deadline=None):
        """Process one hypothesis; returns ``(alpha, rejected_now)``."""
        if not hasattr(self, "t_"):
            self._reset()
        x = float(self._check_X([x])[0])
        if self.uses_deadlines:
            deadline = check_deadlines([deadline], self.t_, 1)[0]
        self._step(x, deadline)
        return self._alphas[-1], self._rej_time[-1] == self.t_

    def fit_predict(self, X, y=None, deadlines=None):
        """Boolean mask of hypotheses rejected by the end of the stream."""
        return self.fit(X, deadlines=deadlines).rejected_mask_

    # -- fitted views ------------------------------------------------------
    @property
    def rejection_time_(self):
        check_is_fitted(self, "t_")
        return np.asarray(self._rej_time, dtype=np.int64)

    @property
    def alpha_(self):
        check_is_fitted(self, "t_")
        return np.asarray(self._alphas, dtype=float)

    @property
    def wealth_(self):
        check_is_fitted(self, "t_")
        return np.asarray(self._wealth, dtype=float)

    @property
    def rejected_mask_(self):
        return self.rejection_time_ > 0

    @property
    def rejected_(self):
        """Current rejection set as sorted 1-based indices."""
        check_is_fitted(self, "t_")
        return sorted(self._rejected)

    @property
    def n_rejections_(self):
        check_is_fitted(self, "t_")
        return len(self._rejected)

    @property
    def decisions_(self):
        """Per-step decision: was hypothesis ``t`` rejected at step ``t``."""
        return self.rejection_time_ == np.arange(1, self.t_ + 1)

    @property
    def record_(self):
        check_is_fitted(self, "t_")
        return RejectionRecord(
            self.rejection_time_,
            alpha=self.alpha_,
            wealth=self.wealth_,
            n_rejections=np.asarray(self._n_rej, dtype=np.int64),
        )
