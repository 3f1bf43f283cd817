import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fraclab.constants import (ConstantsBundle, FracOrder, a_s, as_order, b_s, c_ns, gamma_n_limit,
                               hardy_constant, kappa_bar, mu)
from oracles import c_ns_mp, mu_mp

S_GRID = np.linspace(0.01, 0.99, 50)
orders = st.floats(min_value=0.02, max_value=0.98)


class TestFracOrder:
    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_rejects_outside_open_interval(self, bad):
        with pytest.raises(ValueError):
            FracOrder(bad)

    def test_regime_is_total(self):
        assert FracOrder(0.3).regime == "subcritical"
        assert FracOrder(0.5).regime == "critical"
        assert FracOrder(0.7).regime == "supercritical"

    def test_as_order_accepts_both(self):
        assert as_order(FracOrder(0.25)) == as_order(0.25) == 0.25


class TestClosedForms:
    @pytest.mark.parametrize("N,s", [(1, 0.5), (1, 0.3), (2, 0.5), (3, 0.75), (2, 0.99)])
    def test_c_ns_matches_gamma_formula(self, N, s):
        assert c_ns(N, s) == pytest.approx(c_ns_mp(N, s), rel=1e-12)

    def test_c_1_half_is_inverse_pi(self):
        assert c_ns(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)

    def test_c_2_half_value(self):
        # s 4^s Gamma(1 + s) / (pi Gamma(1 - s)) at s = 1/2 is 1/(2 pi)
        assert c_ns(2, 0.5) == pytest.approx(1 / (2 * math.pi), rel=1e-14)

    def test_c_1s_over_one_minus_s_tends_to_two(self):
        s = 1 - 1e-6
        assert c_ns(1, s) / (1 - s) == pytest.approx(2.0, abs=1e-5)

    def test_half_values(self):
        # at the critical order a_s = 1/pi and kappa_bar = 1
        assert a_s(0.5) == pytest.approx(1 / math.pi, rel=1e-14)
        assert b_s(0.5) == pytest.approx(1 / math.pi, rel=1e-14)
        assert kappa_bar(0.5) == pytest.approx(1.0, rel=1e-14)
        assert hardy_constant(0.5) == pytest.approx(1 / math.pi, rel=1e-14)

    def test_values_at_three_quarters(self):
        assert a_s(0.75) == pytest.approx(c_ns_mp(1, 0.75) / 1.5, rel=1e-12)
        # five-digit value 0.19948 is a rounding slip: the formula gives 0.1994711
        assert a_s(0.75) == pytest.approx(0.19948, abs=1e-5)
        assert b_s(0.75) == pytest.approx(math.gamma(1.25) / (math.sqrt(math.pi) * math.gamma(0.75)), rel=1e-14)
        assert b_s(0.75) == pytest.approx(0.41731, abs=5e-6)
        b_ref = math.gamma(1.25) / (math.sqrt(math.pi) * math.gamma(0.75))
        assert kappa_bar(0.75) == pytest.approx(b_ref / (c_ns_mp(1, 0.75) / 1.5), rel=1e-12)
        # 2.0920 is the ratio of the rounded values above; the exact ratio is 2.092099
        assert kappa_bar(0.75) == pytest.approx(2.0920, abs=1e-4)

    @pytest.mark.parametrize("s", [0.3, 0.6, 0.9])
    def test_b_s_normalises_poisson_kernel(self, s):
        val, _ = integrate.quad(lambda u: (1 + u * u) ** (-(1 + 2 * s) / 2), -np.inf, np.inf,
                                epsabs=1e-13, epsrel=1e-13)
        assert b_s(s) * val == pytest.approx(1.0, abs=1e-10)

    def test_hardy_tends_to_quarter(self):
        assert hardy_constant(1 - 1e-9) == pytest.approx(0.25, abs=1e-8)

    @given(orders)
    def test_kappa_times_a_is_b(self, s):
        assert kappa_bar(s) * a_s(s) == pytest.approx(b_s(s), rel=1e-15)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_gamma_n_limit(self, N):
        assert abs(gamma_n_limit(N) - 2.0) <= 1e-6

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            c_ns(0, 0.5)
        with pytest.raises(ValueError):
            gamma_n_limit(1.5)


class TestMu:
    @pytest.mark.parametrize("gam,s", [(0.3, 0.75), (-0.5, 0.6), (0.1, 0.3), (1.2, 0.9),
                                       (-0.9, 0.2), (1.7, 0.95), (0.5, 0.3)])
    def test_against_mpmath(self, gam, s):
        assert mu(gam, s) == pytest.approx(mu_mp(gam, s), abs=1e-10)

    @pytest.mark.parametrize("s", S_GRID)
    def test_zeros(self, s):
        assert abs(mu(0.0, s)) <= 1e-8
        assert abs(mu(2 * s - 1, s)) <= 1e-8

    @pytest.mark.parametrize("s", S_GRID)
    def test_hardy_identity(self, s):
        assert abs(hardy_constant(s) - (a_s(s) - mu((2 * s - 1) / 2, s))) <= 1e-8

    def test_mid_value_at_three_quarters(self):
        assert mu(0.25, 0.75) == pytest.approx(a_s(0.75) - hardy_constant(0.75), abs=1e-12)
        assert mu(0.25, 0.75) == pytest.approx(-0.0620, abs=5e-5)

    @settings(max_examples=40, deadline=None)
    @given(orders, st.floats(min_value=0.0, max_value=1.0))
    def test_symmetry(self, s, frac):
        # gamma and 2s - 1 - gamma both lie in (-1, 2s) exactly when gamma does
        lo, hi = -1.0 + 1e-3, 2 * s - 1e-3
        gam = lo + frac * (hi - lo)
        assert mu(gam, s) == pytest.approx(mu(2 * s - 1 - gam, s), abs=1e-9)

    @pytest.mark.parametrize("s", [0.2, 0.4, 0.6, 0.8, 0.95])
    def test_mid_value_negative_off_critical(self, s):
        assert -mu((2 * s - 1) / 2, s) > 0

    def test_mid_value_vanishes_at_half(self):
        assert abs(mu(0.0, 0.5)) <= 1e-14

    @pytest.mark.parametrize("gam", [-1.0, 1.5, 2.0])
    def test_domain(self, gam):
        with pytest.raises(ValueError):
            mu(gam, 0.75)


class TestBundle:
    @pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
    def test_positive_and_consistent(self, s):
        b = ConstantsBundle.for_order(s)
        b.check()
        assert b.kappa_bar * b.a_s == pytest.approx(b.b_s, rel=1e-15)
        assert set(b.as_dict()) == {"s", "N", "c_ns", "a_s", "b_s", "kappa_bar", "hardy"}

    def test_critical_bundle(self):
        b = ConstantsBundle.for_order(0.5)
        for v in (b.c_ns, b.a_s, b.b_s):
            assert v == pytest.approx(1 / math.pi, rel=1e-14)
        assert b.kappa_bar == pytest.approx(1.0, rel=1e-14)
