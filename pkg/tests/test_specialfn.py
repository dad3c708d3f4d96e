import math

import numpy as np
import pytest

from bessellimit import specialfn as sf
from bessellimit.sampler import RngPolicy


def bessel_i_series(nu: float, x: float, terms: int = 50) -> float:
    """Ascending power-series oracle for I_nu, independent of the implementation."""
    total = 0.0
    for k in range(terms):
        log_term = ((2 * k + nu) * math.log(x / 2.0)
                    - math.lgamma(k + 1) - math.lgamma(k + nu + 1))
        total += math.exp(log_term)
    return total


class TestBesselI:
    def test_half_order_closed_form(self):
        # I_{1/2}(x) = sqrt(2/(pi x)) sinh x
        assert sf.bessel_i(0.5, 1.0) == pytest.approx(0.9376748882454909, rel=1e-10)
        for x in np.geomspace(1e-3, 30.0, 40):
            closed = math.sqrt(2.0 / (math.pi * x)) * math.sinh(x)
            assert sf.bessel_i(0.5, x) == pytest.approx(closed, rel=1e-10)
            closed_neg = math.sqrt(2.0 / (math.pi * x)) * math.cosh(x)
            assert sf.bessel_i(-0.5, x) == pytest.approx(closed_neg, rel=1e-10)

    def test_at_zero(self):
        assert sf.bessel_i(0.5, 0.0) == 0.0
        assert sf.bessel_i(0.0, 0.0) == 1.0
        assert sf.bessel_i(2.3, 0.0) == 0.0

    def test_against_series_oracle(self):
        for nu in (-0.75, -0.2, 0.0, 0.7, 1.5, 4.0):
            for x in (0.05, 0.5, 2.0, 8.0):
                assert sf.bessel_i(nu, x) == pytest.approx(
                    bessel_i_series(nu, x), rel=1e-10)

    def test_recurrence(self):
        # I_{nu-1}(x) - I_{nu+1}(x) = (2 nu / x) I_nu(x)
        rng = np.random.default_rng(7)
        for _ in range(200):
            nu = rng.uniform(0.5, 5.0)
            x = rng.uniform(0.1, 50.0)
            lhs = sf.bessel_i(nu - 1, x) - sf.bessel_i(nu + 1, x)
            rhs = 2 * nu / x * sf.bessel_i(nu, x)
            assert abs(lhs - rhs) <= 1e-8 * sf.bessel_i(nu - 1, x)

    def test_scaled_variant_large_argument(self):
        # beyond the overflow point of the unscaled form
        val = sf.bessel_i_scaled(0.0, 800.0)
        # leading asymptotics e^{-x} I_nu(x) ~ 1/sqrt(2 pi x)
        assert val == pytest.approx(1.0 / math.sqrt(2 * math.pi * 800.0), rel=1e-2)
        x = 500.0
        assert sf.bessel_i_scaled(1.5, x) == pytest.approx(
            sf.bessel_i(1.5, x) * math.exp(-x), rel=1e-10)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            sf.bessel_i(-1.0, 1.0)
        with pytest.raises(ValueError):
            sf.bessel_i(0.5, -1.0)
        with pytest.raises(ValueError):
            sf.bessel_i_scaled(-1.2, 1.0)


class TestLogGamma:
    def test_values(self):
        assert sf.log_gamma(1.0) == 0.0
        assert sf.log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-12)
        assert sf.log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            sf.log_gamma(0.0)
        with pytest.raises(ValueError):
            sf.log_gamma(-2.0)


class TestNoncentralChisq:
    def test_moments(self):
        rng = RngPolicy(2001).stream(0).generator()
        n = 200_000
        for delta, lam in [(2.0, 0.0), (1.4, 3.0), (0.5, 1.0)]:
            draws = np.array([sf.sample_noncentral_chisq(delta, lam, rng)
                              for _ in range(n)])
            mean, var = draws.mean(), draws.var(ddof=1)
            se_mean = draws.std(ddof=1) / math.sqrt(n)
            m4 = np.mean((draws - mean) ** 4)
            se_var = math.sqrt(max(m4 - var ** 2, 0.0) / n)
            assert abs(mean - (delta + lam)) <= 4 * se_mean
            assert abs(var - (2 * delta + 4 * lam)) <= 4 * se_var

    def test_domain(self):
        rng = RngPolicy(1).stream(0).generator()
        with pytest.raises(ValueError):
            sf.sample_noncentral_chisq(0.0, 1.0, rng)
        with pytest.raises(ValueError):
            sf.sample_noncentral_chisq(1.0, -1.0, rng)
