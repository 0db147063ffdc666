import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supfdr.calibration import PValueCalibrator, calibrate_p, calibrate_stream, reshape_beta
from supfdr.core import DomainError, GammaSequence, harmonic


def exact_calibrator(p, t, gamma, delta):
    """Rational-arithmetic evaluation of the calibrator."""
    p, gamma, delta = Fraction(p), Fraction(gamma), Fraction(delta)
    ell = sum(Fraction(1, i) for i in range(1, t + 1))
    if p > delta * gamma * t / ell:
        return Fraction(0)
    k = math.ceil(max(p * ell / (delta * gamma), 1))
    return 1 / (delta * gamma * k)


class TestCalibrateP:
    def test_examples(self):
        assert calibrate_p(0.02, 1, 0.5, 0.1) == pytest.approx(20.0, rel=1e-12)
        assert calibrate_p(0.06, 1, 0.5, 0.1) == 0.0
        assert calibrate_p(0.02, 2, 1 / 6, 0.1) == pytest.approx(30.0, rel=1e-12)

    def test_examples_match_exact_arithmetic(self):
        assert exact_calibrator("0.02", 1, "0.5", "0.1") == 20
        assert exact_calibrator("0.06", 1, "0.5", "0.1") == 0
        assert exact_calibrator("0.02", 2, Fraction(1, 6), "0.1") == 30

    def test_zero_gamma(self):
        assert calibrate_p(0.0, 3, 0.0, 0.1) == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            calibrate_p(1.2, 1, 0.5, 0.1)

    @given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 40), st.floats(1e-4, 0.5), st.floats(0.01, 1))
    def test_monotone_and_discrete(self, p1, p2, t, gamma, delta):
        lo, hi = sorted((p1, p2))
        f_lo, f_hi = calibrate_p(lo, t, gamma, delta), calibrate_p(hi, t, gamma, delta)
        assert f_lo >= f_hi
        if f_lo > 0:
            k = 1.0 / (delta * gamma * f_lo)
            assert abs(k - round(k)) < 1e-6 and 1 <= round(k) <= t

    def test_null_mean_bounded(self, rng):
        n = 200_000
        for t in (1, 5, 50):
            g = GammaSequence()(t)
            f = np.array([calibrate_p(p, t, g, 0.1) for p in rng.random(n)])
            se = f.std(ddof=1) / math.sqrt(n)
            assert f.mean() <= 1 + 3 * se

    def test_stream_matches_scalar(self, rng):
        p = rng.random(300) ** 3
        g = GammaSequence()
        v = calibrate_stream(p, g, 0.1)
        ref = [calibrate_p(x, t, g(t), 0.1) for t, x in enumerate(p, start=1)]
        assert v.tolist() == ref

    def test_transformer(self):
        cal = PValueCalibrator(delta=0.1).fit()
        out = cal.transform([0.02, 0.02])
        assert out[0] == pytest.approx(20.0) and out[1] == pytest.approx(30.0)
        assert cal.get_params() == {"delta": 0.1, "gamma": "default"}


class TestReshape:
    def test_examples(self):
        assert reshape_beta(1, 1) == 1.0
        assert reshape_beta(3.7, 2) == pytest.approx(4 / 3, rel=1e-15)
        assert reshape_beta(0.5, 5) == 0.0

    def test_negative(self):
        with pytest.raises(DomainError):
            reshape_beta(-1, 3)

    @given(st.floats(0, 100), st.integers(1, 100))
    def test_formula(self, r, t):
        assert reshape_beta(r, t) == min(math.floor(r), t) / harmonic(t)
