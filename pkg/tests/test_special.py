"""Closed-form constants against their exact values and cross-identities."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabpp import special as sp

# exact values of the limiting variance constant for the binomial case
V_EXACT = {
    1.0: 1.0 / 6.0,
    2.0: 85.0 / 108.0,
    3.0: 149.0 / 18.0,
    4.0: 135793.0 / 972.0,
}
# exact squared Poisson-excess coefficients
D2_EXACT = {
    0.5: math.pi / 32.0,
    1.0: 0.0,
    2.0: 0.25,
    3.0: 2.25,
    4.0: 20.25,
}


class TestGamma:
    def test_known_values(self):
        assert sp.gamma(1.0) == pytest.approx(1.0, rel=1e-14)
        assert sp.gamma(3.0) == pytest.approx(2.0, rel=1e-14)
        assert sp.gamma(0.5) == pytest.approx(1.7724538509055160, rel=1e-14)

    def test_against_libm_over_range(self):
        # math.gamma is the independent reference; requirement is 12 digits
        for x in np.linspace(0.01, 30.0, 977):
            assert sp.gamma(float(x)) == pytest.approx(math.gamma(x), rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_domain_error(self, x):
        with pytest.raises(ValueError):
            sp.gamma(x)


def _finite_sum_2f1(a, b, c, z, n_terms):
    # same term recurrence as the production series, summed to a fixed length
    total = 1.0
    term = 1.0
    for n in range(n_terms):
        term *= (a + n) * (b + n) / (c + n) * z / (n + 1)
        total += term
    return total


class TestGauss2F1:
    def test_empty_sum(self):
        assert sp.gauss_2f1(2.3, -1.7, 0.4, 0.0) == 1.0

    def test_terminating(self):
        # 1 + a b / c * z = 1 - 2/9
        assert sp.gauss_2f1(-1, 2, 3, 1.0 / 3.0) == pytest.approx(7.0 / 9.0, rel=1e-15)

    def test_log_identity(self):
        # 2F1(1,1;2;z) = -log(1-z)/z
        z = 1.0 / 3.0
        assert sp.gauss_2f1(1, 1, 2, z) == pytest.approx(-math.log(1 - z) / z, rel=1e-13)
        assert sp.gauss_2f1(1, 1, 2, z) == pytest.approx(1.2163953243244932, rel=1e-13)

    @given(
        m=st.integers(min_value=0, max_value=8),
        b=st.floats(min_value=0.25, max_value=5.0),
        c=st.floats(min_value=0.25, max_value=5.0),
        z=st.floats(min_value=-0.9, max_value=0.9),
    )
    def test_terminating_equals_finite_sum(self, m, b, c, z):
        # nonpositive-integer a terminates after m+1 terms; identical arithmetic
        val = sp.gauss_2f1(-float(m), b, c, z)
        assert val == _finite_sum_2f1(-float(m), b, c, z, m)

    def test_pole_error(self):
        with pytest.raises(sp.PoleError):
            sp.gauss_2f1(0.5, 1.0, -2.0, 0.1)

    def test_pole_avoided_by_termination(self):
        # a = -1 terminates before c = -2 is consumed
        assert sp.gauss_2f1(-1.0, 1.0, -2.0, 0.5) == pytest.approx(1.0 + 0.5 / 2.0)

    @pytest.mark.parametrize("z", [1.0, -1.0, 1.5])
    def test_domain_error(self, z):
        with pytest.raises(ValueError):
            sp.gauss_2f1(0.5, 0.5, 1.0, z)

    def test_convergence_cap(self):
        with pytest.raises(sp.ConvergenceError):
            sp.gauss_2f1(0.5, 0.5, 1.0, 0.999, max_terms=10)


class TestVAlpha:
    @pytest.mark.parametrize("alpha,expected", sorted(V_EXACT.items()))
    def test_exact_values(self, alpha, expected):
        assert sp.v_alpha(alpha) == pytest.approx(expected, rel=1e-12)

    def test_half_closed_form(self):
        closed = 0.5 + math.sqrt(2.0) * math.asin(1.0 / math.sqrt(3.0)) - 13.0 * math.pi / 32.0
        assert sp.v_alpha(0.5) == pytest.approx(closed, rel=1e-12)
        assert sp.v_alpha(0.5) == pytest.approx(0.094148, abs=5e-7)

    def test_positive_on_grid(self):
        for alpha in np.linspace(0.04, 4.0, 100):
            assert sp.v_alpha(float(alpha)) > 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            sp.v_alpha(0.0)


class TestDeltaAlpha:
    def test_zero_at_one(self):
        assert sp.delta_alpha(1.0) == 0.0

    def test_signed_values(self):
        assert sp.delta_alpha(2.0) == pytest.approx(-0.5, rel=1e-13)
        assert sp.delta_alpha(0.5) == pytest.approx(
            math.sqrt(math.pi) / (4.0 * math.sqrt(2.0)), rel=1e-13)

    @pytest.mark.parametrize("alpha,expected", sorted(D2_EXACT.items()))
    def test_squared_exact_values(self, alpha, expected):
        if expected == 0.0:
            assert sp.delta_alpha_sq(alpha) == pytest.approx(0.0, abs=1e-12)
        else:
            assert sp.delta_alpha_sq(alpha) == pytest.approx(expected, rel=1e-12)

    @given(alpha=st.floats(min_value=1e-3, max_value=50.0))
    def test_sign_matches_one_minus_alpha(self, alpha):
        d = sp.delta_alpha(alpha)
        if alpha == 1.0:
            assert d == 0.0
        else:
            assert math.copysign(1.0, d) == math.copysign(1.0, 1.0 - alpha)


class TestLimits:
    def test_limiting_mean(self):
        assert sp.limiting_mean(1.0, 1.0) == pytest.approx(0.5, rel=1e-14)
        assert sp.limiting_mean(2.0, 1.0) == pytest.approx(0.5, rel=1e-14)
        assert sp.limiting_mean(1.0, 0.0) == 0.0

    def test_limiting_variance(self):
        assert sp.limiting_variance(1.0, 1.0) == pytest.approx(1.0 / 6.0, rel=1e-12)
        assert sp.limiting_variance(2.0, 1.0) == pytest.approx(28.0 / 27.0, rel=1e-12)
        assert sp.limiting_variance(1.0, 0.0) == 0.0

    def test_exp_moment(self):
        assert sp.exp_moment(1.0) == pytest.approx(0.5, rel=1e-14)
        assert sp.exp_moment(2.0) == pytest.approx(0.5, rel=1e-14)
        assert sp.exp_moment(0.0) == 1.0

    def test_v1_consistency_identity(self):
        # binds gamma, the hypergeometric series, and the arithmetic at once
        assert sp.v_alpha(1.0) == pytest.approx(1.0 / 6.0, rel=1e-12)

    def test_constants_bundle(self):
        c = sp.AsymptoticConstants.for_alpha(2.0)
        assert c.delta_alpha_sq == pytest.approx(0.25, rel=1e-12)
        assert c.sigma_sq(1.0) == pytest.approx(85.0 / 108.0 + 0.25, rel=1e-12)
        assert c.limiting_mean_coeff == pytest.approx(0.5, rel=1e-13)
