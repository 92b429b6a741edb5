from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanaft.errors import DomainError, UnsupportedTailError
from kanaft.survival import (
    KaplanMeierCurve,
    censoring_km,
    conditional_residual_expectation,
    inverse_G_integral,
    inverse_G_integrals,
    kaplan_meier,
    km_eval,
)


def km_oracle(times, events, t):
    """Product-limit by direct enumeration, in exact rational arithmetic."""
    s = Fraction(1)
    for u in sorted(set(times)):
        if u > t:
            break
        d = sum(1 for ti, ei in zip(times, events) if ti == u and ei)
        n = sum(1 for ti in times if ti >= u)
        if d:
            s *= 1 - Fraction(d, n)
    return s


def riemann_oracle(curve, T, h=1e-4):
    """Midpoint rule on 1/G(u-); cells of width h align with a 0.01 time grid."""
    m = round(T / h)
    u = (np.arange(m) + 0.5) * h
    return float(np.sum(1.0 / km_eval(curve, u, side="left")) * h)


data_strategy = st.lists(
    st.tuples(st.integers(1, 6), st.booleans()), min_size=1, max_size=10
)


class TestKaplanMeier:
    def test_hand_example(self):
        c = kaplan_meier([1, 2, 3], [1, 0, 1])
        assert km_eval(c, 1) == pytest.approx(2 / 3)
        assert km_eval(c, 2) == pytest.approx(2 / 3)
        assert km_eval(c, 3) == 0.0

    def test_uncensored_is_empirical(self):
        t = np.array([0.5, 1.5, 2.0, 7.0, 9.0])
        c = kaplan_meier(t, np.ones(5, bool))
        for i, ti in enumerate(t):
            assert km_eval(c, ti) == pytest.approx(1 - (i + 1) / 5, abs=1e-15)

    def test_all_censored(self):
        c = kaplan_meier([1, 2, 3], [0, 0, 0])
        assert len(c.jump_times) == 0
        assert km_eval(c, 100.0) == 1.0

    @pytest.mark.parametrize("times,events", [([], []), ([1, 0], [1, 1]), ([1, -2], [1, 1])])
    def test_invalid(self, times, events):
        with pytest.raises(DomainError):
            kaplan_meier(times, events)

    def test_ties_events_first(self):
        # at t=2 one event and one censoring: three at risk for the event
        c = kaplan_meier([1, 2, 2, 3], [1, 1, 0, 1])
        assert km_eval(c, 2) == pytest.approx(0.75 * 2 / 3)

    @settings(max_examples=300, deadline=None)
    @given(data_strategy)
    def test_matches_enumeration(self, pairs):
        times = [float(t) for t, _ in pairs]
        events = [e for _, e in pairs]
        c = kaplan_meier(times, events)
        for t in np.arange(0, 7.5, 0.5):
            assert km_eval(c, t) == pytest.approx(float(km_oracle(times, events, t)), abs=1e-14)

    @settings(max_examples=200, deadline=None)
    @given(data_strategy)
    def test_mass_decomposition(self, pairs):
        c = kaplan_meier([float(t) for t, _ in pairs], [e for _, e in pairs])
        assert abs(c.masses.sum() + c.tail_mass - 1.0) < 1e-12
        assert np.all(np.diff(c.survival_probs) <= 0)


class TestCensoringKM:
    def test_no_censoring(self):
        G = censoring_km([1, 2, 3], [1, 1, 1])
        assert km_eval(G, 5.0) == 1.0

    def test_hand_example(self):
        G = censoring_km([1, 2, 3], [1, 0, 1])
        assert km_eval(G, 2) == pytest.approx(0.5)
        assert km_eval(G, 1.99) == 1.0

    def test_fully_censored_is_empirical(self):
        G = censoring_km([1, 2, 4, 8], [0, 0, 0, 0])
        np.testing.assert_allclose(G.survival_probs, [0.75, 0.5, 0.25, 0.0])

    @settings(max_examples=100, deadline=None)
    @given(data_strategy)
    def test_symmetry(self, pairs):
        times = [float(t) for t, _ in pairs]
        ev = np.array([e for _, e in pairs])
        a, b = kaplan_meier(times, ev), censoring_km(times, ~ev)
        np.testing.assert_array_equal(a.jump_times, b.jump_times)
        np.testing.assert_array_equal(a.survival_probs, b.survival_probs)


class TestKmEval:
    curve = kaplan_meier([1, 2, 3], [1, 0, 1])

    def test_origin(self):
        assert km_eval(self.curve, 0.0, "right") == km_eval(self.curve, 0.0, "left") == 1.0

    def test_sides(self):
        assert km_eval(self.curve, 1.0, "right") == pytest.approx(2 / 3)
        assert km_eval(self.curve, 1.0, "left") == 1.0

    def test_beyond_last(self):
        c = kaplan_meier([1, 2, 3], [1, 1, 0])
        assert km_eval(c, 50.0) == pytest.approx(1 / 3)

    def test_negative(self):
        with pytest.raises(DomainError):
            km_eval(self.curve, -0.1)


class TestConditionalExpectation:
    def test_unconditional_mean(self):
        t = np.array([0.4, 1.1, 2.5, 3.0, 7.2])
        c = kaplan_meier(t, np.ones(5, bool))
        assert conditional_residual_expectation(c, 0.0) == pytest.approx(t.mean())

    def test_hand_example(self):
        c = kaplan_meier([1, 2, 3], [1, 1, 1])
        assert conditional_residual_expectation(c, 1.5) == pytest.approx(2.5)

    def test_beyond_last_jump(self):
        c = kaplan_meier([1, 2, 3], [1, 1, 1])
        assert conditional_residual_expectation(c, 3.0) == 3.0
        assert conditional_residual_expectation(c, 4.5) == 4.5

    def test_tail_mass_goes_to_max_time(self):
        # S never reaches 0: mass 1/3 left at the censored max time 5
        c = kaplan_meier([1, 2, 5], [1, 1, 0])
        assert conditional_residual_expectation(c, 0.5) == pytest.approx((1 + 2 + 5) / 3)
        assert conditional_residual_expectation(c, 1.5) == pytest.approx((2 + 5) / 2)

    @settings(max_examples=200, deadline=None)
    @given(data_strategy, st.floats(0, 7))
    def test_never_below_t0(self, pairs, t0):
        c = kaplan_meier([float(t) for t, _ in pairs], [e for _, e in pairs])
        assert conditional_residual_expectation(c, t0) >= t0 - 1e-12


def _curve(jumps, probs):
    return KaplanMeierCurve(np.array(jumps, float), np.array(probs, float), np.ones(len(jumps), int),
                            np.ones(len(jumps), int), max(jumps) if jumps else 0.0)


class TestInverseGIntegral:
    def test_no_censoring(self):
        G = censoring_km([1, 2, 3], [1, 1, 1])
        assert inverse_G_integral(G, 2.7) == pytest.approx(2.7)

    def test_two_pieces(self):
        assert inverse_G_integral(_curve([1.0], [0.5]), 2.0) == pytest.approx(3.0)

    def test_zero(self):
        assert inverse_G_integral(_curve([1.0], [0.5]), 0.0) == 0.0

    def test_zero_survival_before_limit(self):
        G = _curve([1.0, 2.0], [0.5, 0.0])
        assert inverse_G_integral(G, 2.0) == pytest.approx(3.0)
        with pytest.raises(UnsupportedTailError):
            inverse_G_integral(G, 2.5)

    def test_monotone_piecewise_linear(self):
        G = censoring_km([0.3, 1.0, 1.4, 2.0, 2.2], [1, 0, 1, 0, 1])
        T = np.linspace(0, 2.2, 301)
        vals = inverse_G_integrals(G, T)
        assert np.all(np.diff(vals) >= 0)
        # linear between jumps: second differences vanish away from knots
        seg = (T > 1.05) & (T < 1.95)
        assert np.allclose(np.diff(vals[seg], 2), 0, atol=1e-12)

    def test_riemann_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            t = np.round(rng.uniform(0.1, 5, n), 2)
            e = rng.random(n) < 0.5
            G = censoring_km(t, e)
            T = float(t.max())
            exact = inverse_G_integral(G, T)
            assert exact == pytest.approx(riemann_oracle(G, T), rel=1e-6)
