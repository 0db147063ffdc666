import itertools
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supfdr import (
    ELOND,
    RLOND,
    ClosedELOND,
    ClosedELONDAlt,
    ClosedRLOND,
    GammaSequence,
    closure_membership,
    ecollection_value,
)
from supfdr.core import CapabilityError, DomainError
from supfdr.oracles import brute_closure_level, has_self_consistent_set, self_consistency_check
from supfdr.verification import closure_levels, mixed_evalues, mixed_pvalues

DELTA = 0.1


def exact_reset_level(history, rejected, delta):
    """Smallest rejecting level at ``t = len(history) + 1`` in rational arithmetic."""
    t = len(history) + 1
    d = Fraction(delta)
    gam = [Fraction(1, j * (j + 1)) for j in range(1, t + 1)]
    x = [Fraction(v) for v in history]
    r_new = set(rejected) | {t}
    need = Fraction(0)
    for bits in itertools.product((0, 1), repeat=t - 1):
        S = [i + 1 for i in range(t - 1) if bits[i]] + [t]
        base = sum(gam[j] * x[i - 1] for j, i in enumerate(S[:-1]))
        w = gam[len(S) - 1]
        rhs = Fraction(len(set(S) & r_new), len(r_new)) / d
        need = max(need, (rhs - base) / w)
    return 1 / need


class TestFrozenLevels:
    E = [30.0, 0.5, 12.0, 2.0]
    P = [0.001, 0.4, 0.003, 0.02]

    def test_reset(self):
        est = ClosedELOND(delta=DELTA).fit(self.E)
        assert est.rejected_ == [1]
        assert est._level(5) == pytest.approx(1 / 53, rel=1e-12)
        assert exact_reset_level([Fraction(v) for v in self.E], [1], Fraction(1, 10)) == Fraction(1, 53)

    def test_gap(self):
        est = ClosedELONDAlt(delta=DELTA).fit(self.E)
        assert est._level(5) == pytest.approx(0.007575757575757574, rel=1e-12)

    def test_calibrated(self):
        est = ClosedRLOND(delta=DELTA).fit(self.P)
        assert est.rejected_ == [1, 3, 4]
        assert est._level(5) == pytest.approx(0.022222222222222223, rel=1e-12)


class TestWitnesses:
    def test_closed_elond_doubles_first_level(self):
        g = GammaSequence()
        est = ClosedELOND(delta=DELTA).fit([1 / (DELTA * g(1)), 0.0])
        assert est.alpha_[1] == pytest.approx(2 * DELTA * g(1), rel=1e-12)
        assert ELOND(delta=DELTA).fit([1 / (DELTA * g(1)), 0.0]).alpha_[1] == pytest.approx(DELTA * g(2))

    def test_closed_rlond_second_level(self):
        g = GammaSequence()
        est = ClosedRLOND(delta=DELTA).fit([0.0, 1.0])
        assert est.alpha_[1] == pytest.approx(DELTA * g(1), rel=1e-12)
        assert RLOND(delta=DELTA).fit([0.0, 1.0]).alpha_[1] < est.alpha_[1]


class TestDynamicProgram:
    @pytest.mark.parametrize("kind", ["reset", "gap", "calibrated-reset"])
    def test_matches_exhaustive(self, kind, rng):
        for _ in range(25):
            t = int(rng.integers(1, 11))
            x = mixed_pvalues(rng, t) if kind == "calibrated-reset" else mixed_evalues(rng, t)
            in_r = rng.random(t - 1) < 0.4
            rej = (np.flatnonzero(in_r) + 1).tolist()
            fast = closure_levels(kind, x[:-1], in_r, DELTA)
            slow = brute_closure_level(t, x, kind, DELTA, rej)
            assert fast == pytest.approx(slow, rel=1e-9)

    def test_exact_rational_reset(self, rng):
        for _ in range(10):
            t = int(rng.integers(2, 8))
            x = np.round(mixed_evalues(rng, t - 1), 3)
            est = ClosedELOND(delta=0.125).fit(x)
            ref = exact_reset_level(x.tolist(), est.rejected_, 0.125)
            assert est._level(t) == pytest.approx(float(ref), rel=1e-12)

    def test_restricted_fast_path_is_relaxation(self, rng):
        differ = 0
        for _ in range(40):
            p = mixed_pvalues(rng, 30)
            in_r = rng.random(29) < 0.3
            exact = closure_levels("calibrated-reset", p[:-1], in_r, DELTA)
            loose = closure_levels("calibrated-reset", p[:-1], in_r, DELTA, restrict=True)
            assert loose >= exact * (1 - 1e-12)
            differ += loose > exact * (1 + 1e-9)
        assert differ > 0


class TestMembership:
    @pytest.mark.parametrize("cls,kind,gen", [
        (ClosedELOND, "reset", mixed_evalues),
        (ClosedELONDAlt, "gap", mixed_evalues),
        (ClosedRLOND, "calibrated-reset", mixed_pvalues),
    ])
    def test_closed_procedures_stay_in_closure(self, cls, kind, gen, rng):
        for _ in range(5):
            x = gen(rng, 11)
            est = cls(delta=DELTA).fit(x)
            rt = est.rejection_time_
            for t in range(1, 12):
                R = [i + 1 for i in range(t) if 0 < rt[i] <= t]
                assert closure_membership(R, t, kind, x, DELTA, rtol=1e-12)

    def test_too_large(self):
        with pytest.raises(CapabilityError):
            closure_membership([1], 17, "reset", np.ones(17))

    def test_empty_set_member(self):
        assert closure_membership([], 3, "gap", [0.0, 0.0, 0.0])

    def test_outside_range(self):
        with pytest.raises(DomainError):
            closure_membership([4], 3, "reset", [1.0, 1.0, 1.0])

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=9), st.data())
    def test_self_consistent_sets_are_members(self, e, data):
        # reset weights with nonincreasing gamma dominate gamma_i at each index
        t = len(e)
        g = GammaSequence().values(t)
        R = data.draw(st.sets(st.integers(1, t), min_size=1))
        if self_consistency_check(R, g, e, DELTA):
            assert closure_membership(R, t, "reset", e, DELTA)

    def test_invalid_weight_family_breaks_implication(self):
        # weights violate the per-index lower bound; closure holds with no self-consistent set
        d = DELTA
        table = {(1,): [0.5], (2,): [1.0], (1, 2): [0.5, 0.5]}
        e = [1 / (2 * d), 3 / (2 * d)]
        weights = lambda S: table[S]
        assert closure_membership([2], 2, weights, e, d)
        assert not has_self_consistent_set([0.5, 0.5], e, d)


class TestCollections:
    def test_reset_value(self):
        g = GammaSequence()
        assert ecollection_value("reset", [2, 3], [0, 4.0, 6.0]) == pytest.approx(g(1) * 4 + g(2) * 6)

    def test_gap_value(self):
        g = GammaSequence()
        v = ecollection_value("gap", [2, 3], [0, 4.0, 6.0])
        assert v == pytest.approx(g.prefix(2) * 4 + g(3) * 6)

    def test_unknown(self):
        with pytest.raises(DomainError):
            ecollection_value("nope", [1], [1.0])

    @given(st.lists(st.floats(0, 50), min_size=2, max_size=8), st.data())
    def test_increasing(self, e, data):
        t = len(e)
        S = sorted(data.draw(st.sets(st.integers(1, t - 1))))
        bigger = S + [t]
        for kind in ("reset", "gap"):
            assert ecollection_value(kind, bigger, e) >= ecollection_value(kind, S, e)


def test_step_time_grows_linearly_in_history(rng):
    # per-step cost of the quadratic recursion at t=2000 vs t=1000
    def per_step(t):
        est = ClosedELOND(delta=DELTA).fit(mixed_evalues(rng, t))
        reps, start = 40, time.perf_counter()
        for _ in range(reps):
            est._level(t + 1)
        return (time.perf_counter() - start) / reps

    per_step(200)
    ratio = per_step(2000) / per_step(1000)
    assert 3.0 <= ratio <= 6.0
