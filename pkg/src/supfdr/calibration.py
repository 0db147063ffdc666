"""p-to-e calibration and the harmonic reshaping function."""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .core import DomainError, as_gamma, harmonic, harmonic_values
from .validation import check_delta, check_pvalues


def scaled_calibrated(p, k, gamma_k, ell_k, delta):
    """``delta * gamma_k * f_k(p)``, i.e. ``1{p <= delta gamma_k k / ell_k} / ceil(...)``.

    Working with the scaled value keeps the closure recursions free of the
    ``delta * (1 / delta)`` round trip.
    """
    if gamma_k <= 0.0:
        return 0.0
    if not p <= delta * gamma_k * k / ell_k:
        return 0.0
    return 1.0 / math.ceil(max(p * ell_k / (delta * gamma_k), 1.0))


def calibrate_p(p, t, gamma_t, delta):
    """Calibrated e-value ``f_t(p)`` used by r-LOND and its variants.

    Takes values in ``{0} U {1 / (delta gamma_t k) : k = 1..t}`` and is
    nonincreasing in ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p-value must lie in [0, 1], got {p}")
    if gamma_t <= 0.0:
        return 0.0
    ell = harmonic(t)
    if not p <= delta * gamma_t * t / ell:
        return 0.0
    return 1.0 / (delta * gamma_t * math.ceil(max(p * ell / (delta * gamma_t), 1.0)))


def calibrate_stream(p_values, gamma="default", delta=0.1):
    """Vector form of :func:`calibrate_p` over positions ``1..n``."""
    p = check_pvalues(p_values)
    n = p.size
    if n == 0:
        return np.empty(0)
    g = as_gamma(gamma).values(n)
    ell = harmonic_values(n)
    t = np.arange(1, n + 1)
    out = np.zeros(n)
    live = g > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = live & (p <= delta * g * t / ell)
        k = np.ceil(np.maximum(p * ell / (delta * g), 1.0))
        out[ok] = 1.0 / (delta * g[ok] * k[ok])
    return out


def reshape_beta(r, t):
    """Reshaping function ``(floor(r) ^ t) / ell_t``."""
    if r < 0:
        raise DomainError(f"reshaping argument must be >= 0, got {r}")
    return min(math.floor(r), t) / harmonic(t)


class PValueCalibrator(TransformerMixin, BaseEstimator):
    """Map a p-value stream to calibrated e-values position by position.

    Stateless; ``fit`` only validates parameters so the calibrator can sit
    in a pipeline ahead of any e-value procedure.
    """

    def __init__(self, delta=0.1, gamma="default"):
        self.delta = delta
        self.gamma = gamma

    def fit(self, X=None, y=None):
        check_delta(self.delta)
        self.gamma_ = as_gamma(self.gamma)
        return self

    def transform(self, X):
        check_delta(self.delta)
        return calibrate_stream(X, self.gamma, self.delta)
