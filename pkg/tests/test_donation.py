import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supfdr import (
    ELOND,
    RLOND,
    DonationEBH,
    DonationELOND,
    DonationETOAD,
    DonationOnlineEBH,
    DonationRLOND,
    GammaSequence,
    OnlineEBH,
    RandomizedDonationELOND,
    calibrate_stream,
    donation_ebh_offline,
    ebh_offline,
    restricted_round,
)
from supfdr.core import ConfigError, DomainError, harmonic
from supfdr.donation import (
    donation_elond_level,
    donation_rank,
    donation_rlond_level,
    randomized_level,
    stochastic_round,
)
from supfdr.oracles import brute_r_scan, naive_wealth
from supfdr.verification import mixed_evalues, mixed_pvalues

DELTA = 0.1
evalue_lists = st.lists(st.floats(0, 300, allow_nan=False), min_size=1, max_size=40)


class TestLevels:
    def test_elond_level(self):
        assert donation_elond_level(0, 0.5, 0.1, 0.0) == pytest.approx(0.05)
        assert donation_elond_level(1, 1 / 6, 0.1, 0.5) == pytest.approx(0.1 / 6 * 2 / 0.9)
        assert donation_elond_level(1, 1 / 6, 0.1, 5.0) == math.inf

    def test_rlond_level(self):
        assert donation_rlond_level(1, 2, 1 / 6, 0.1, 0.0) == pytest.approx(2 * 0.1 / 6 / 1.5)
        assert donation_rlond_level(1, 2, 1 / 6, 0.1, 5.0) == 1.0
        # floor((R+1)/(1-x)) capped at t
        assert donation_rlond_level(3, 3, 0.2, 0.1, 2.0) == pytest.approx(0.1 * 0.2 * 3 / harmonic(3))


class TestDonationELOND:
    def test_small_stream(self):
        est = DonationELOND(delta=DELTA).fit([25.0, 0.0, 0.0])
        assert est.alpha_[0] == pytest.approx(0.05)
        assert est.alpha_[1] == pytest.approx(0.037037037037037035, rel=1e-12)
        assert est.wealth_.tolist() == [0.0, 0.5, 0.5]

    def test_witness_second_level(self):
        g = GammaSequence()
        est = DonationELOND(delta=DELTA).fit([1 / (DELTA * g(1)), 1.0])
        # wealth min(gamma_1 E_1 - 1/(2 delta), gamma_1) = gamma_1
        assert est.wealth_[1] == pytest.approx(g(1))
        assert est.alpha_[1] == pytest.approx(2 * DELTA * g(2) / (1 - 2 * DELTA * g(1)))

    @given(evalue_lists)
    def test_dominates_elond(self, e):
        a = DonationELOND(delta=DELTA).fit(e)
        b = ELOND(delta=DELTA).fit(e)
        assert set(b.rejected_) <= set(a.rejected_)
        assert a.negative_wealth_steps_ == 0

    def test_wealth_matches_naive(self, rng):
        e = mixed_evalues(rng, 400)
        est = DonationELOND(delta=DELTA).fit(e)
        g = est.gamma_.values(400)
        rt = est.rejection_time_
        for t in range(1, 401):
            rej = [i + 1 for i in range(t - 1) if 0 < rt[i] < t]
            assert est.wealth_[t - 1] == pytest.approx(naive_wealth(t, g, e, rej, DELTA), rel=1e-9, abs=1e-12)
        assert est.ledger_.check()


class TestDonationRLOND:
    def test_witness_second_level(self):
        g = GammaSequence()
        est = DonationRLOND(delta=DELTA).fit([0.0, 1.0])
        assert est.alpha_[1] == pytest.approx(2 * DELTA * g(2) / harmonic(2), rel=1e-12)

    def test_calibrated_equivalence(self, rng):
        for _ in range(20):
            p = mixed_pvalues(rng, 200)
            a = DonationRLOND(delta=DELTA).fit(p)
            b = DonationELOND(delta=DELTA).fit(calibrate_stream(p, GammaSequence(), DELTA))
            assert np.array_equal(a.decisions_, b.decisions_)

    def test_dominates_rlond(self, rng):
        for _ in range(20):
            p = mixed_pvalues(rng, 200)
            a = DonationRLOND(delta=DELTA).fit(p)
            b = RLOND(delta=DELTA).fit(p)
            assert np.all(a.alpha_ >= b.alpha_ * (1 - 1e-12))
            assert set(b.rejected_) <= set(a.rejected_)


class TestRounding:
    def test_pass_through(self):
        assert restricted_round(0.5, 0.1, 0.3) == 0.5
        assert restricted_round(12.0, 0.1, 0.9) == 12.0
        assert restricted_round(5.0, 1.0, 0.0) == 5.0

    def test_rounds_to_two_values(self):
        assert restricted_round(4.0, 0.1, 0.0) == pytest.approx(10.0)
        assert restricted_round(4.0, 0.1, 1.0) == 1.0

    def test_bad_draw(self):
        with pytest.raises(DomainError):
            restricted_round(2.0, 0.1, 1.5)
        with pytest.raises(DomainError):
            stochastic_round(2.0, 0.0, 0.5)

    @given(st.floats(0, 50), st.floats(1e-3, 0.999), st.floats(0, 1))
    def test_reject_iff_rounded_above_threshold(self, x, a, u):
        alpha = randomized_level(a, u)
        rounded = restricted_round(x, a, u)
        if x > 1 and x < 1 / a:
            assert (x >= 1 / alpha) == (rounded >= 1 / a * (1 - 1e-12))

    def test_mean_preserved(self, rng):
        u = rng.random(200_000)
        for x, a in [(2.0, 0.1), (5.0, 0.05), (1.5, 0.4)]:
            v = np.array([restricted_round(x, a, ui) for ui in u])
            se = v.std(ddof=1) / math.sqrt(u.size)
            assert abs(v.mean() - x) <= 4 * se

    def test_stochastic_round(self):
        assert stochastic_round(2.0, 0.25, 0.4) == 4.0
        assert stochastic_round(2.0, 0.25, 0.6) == 0.0


class TestRandomized:
    def test_requires_random_state(self):
        with pytest.raises(ConfigError):
            RandomizedDonationELOND(delta=DELTA).fit([1.0])

    def test_seeded_reproducible(self, rng):
        e = mixed_evalues(rng, 300)
        a = RandomizedDonationELOND(delta=DELTA, random_state=5).fit(e)
        b = RandomizedDonationELOND(delta=DELTA, random_state=np.random.default_rng(5)).fit(e)
        c = RandomizedDonationELOND(delta=DELTA, random_state=5).fit(e)
        assert np.array_equal(a.rejection_time_, c.rejection_time_)
        assert len(a.uniforms_) == len(b.uniforms_) == 300

    def test_levels_at_least_deterministic_hat(self, rng):
        e = mixed_evalues(rng, 200)
        est = RandomizedDonationELOND(delta=DELTA, random_state=1).fit(e)
        assert est.negative_wealth_steps_ == 0

    def test_superset_fails_on_known_stream(self):
        # a randomized rejection spends donated wealth; the deterministic rule
        # later saturates its level and rejects hypothesis 93 alone
        rng = np.random.default_rng(16)
        e = mixed_evalues(rng, 200)[:93]
        det = DonationELOND(delta=DELTA).fit(e)
        rnd = RandomizedDonationELOND(delta=DELTA, random_state=16).fit(e)
        assert det.alpha_[92] == math.inf
        assert 93 in det.rejected_ and 93 not in rnd.rejected_
        assert {1, 6, 18, 25, 43} <= set(rnd.rejected_) - set(det.rejected_)


class TestOnlineEBHFamily:
    @given(evalue_lists)
    def test_rank_matches_scan(self, e):
        est = DonationOnlineEBH(delta=0.3).fit(e)
        g = GammaSequence().values(len(e))
        assert est.r_ == brute_r_scan(list(zip(g, e)), 0.3, "donation-ebh")
        assert est.r_ == donation_rank(g, e, 0.3)[0]

    @given(evalue_lists)
    def test_dominates_online_ebh(self, e):
        a = DonationOnlineEBH(delta=0.3).fit(e)
        b = OnlineEBH(delta=0.3).fit(e)
        assert a.r_ >= b.r_

    def test_etoad_infinite_deadline_matches_online(self, rng):
        for _ in range(10):
            e = mixed_evalues(rng, 80)
            a = DonationETOAD(delta=DELTA).fit(e, deadlines=np.full(80, math.inf))
            b = DonationOnlineEBH(delta=DELTA).fit(e)
            assert np.array_equal(a.rejection_time_, b.rejection_time_)

    def test_etoad_rank_with_expired(self, rng):
        for _ in range(10):
            n = 60
            e = mixed_evalues(rng, n)
            dl = np.arange(1, n + 1) + rng.integers(0, 10, n)
            est = DonationETOAD(delta=DELTA).fit(e, deadlines=dl)
            g = est.gamma_.values(n)
            t = n
            active = [i for i in range(n) if dl[i] >= t]
            passed = [i for i in range(n) if dl[i] < t]
            rt = est.rejection_time_
            ctx = {
                "passed_rejected": [(g[i], e[i]) for i in passed if rt[i] > 0],
                "passed_unrejected": [(g[i], e[i]) for i in passed if rt[i] == 0],
            }
            items = [(g[i], e[i]) for i in active]
            assert est.r_ == brute_r_scan(items, DELTA, "donation-etoad", ctx)
            assert est.ledger_.check()


class TestOffline:
    def test_superset_and_scan(self, rng):
        strict = 0
        for _ in range(100):
            m = int(rng.integers(1, 80))
            e = mixed_evalues(rng, m, pi1=0.2)
            a, b = donation_ebh_offline(e, DELTA), ebh_offline(e, DELTA)
            assert set(b) <= set(a)
            assert len(a) == brute_r_scan([(1 / m, x) for x in e], DELTA, "donation-ebh")
            strict += len(a) > len(b)
        assert strict > 0

    def test_estimator(self):
        est = DonationEBH(delta=0.5).fit([9.0, 0.1, 3.0, 2.5])
        assert est.rejected_.tolist() == [a in donation_ebh_offline([9.0, 0.1, 3.0, 2.5], 0.5)
                                          for a in (1, 2, 3, 4)]
        assert est.n_rejections_ >= 1
