import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from nomcor.core import BudgetExceeded, InputError
from nomcor.distributions import (
    MvnConfig,
    cauchy_cdf,
    cauchy_quantile,
    chi2_sf,
    f_sf,
    mvn_cdf,
    normal_cdf,
    normal_quantile,
)


def _chi2_pdf(x, df):
    return x ** (df / 2 - 1) * math.exp(-x / 2) / (2 ** (df / 2) * math.gamma(df / 2))


class TestUnivariate:
    def test_normal_cdf_against_erf(self):
        for z in (-3.0, -0.7, 0.0, 1.3, 4.0):
            assert normal_cdf(z) == pytest.approx(0.5 * (1 + math.erf(z / math.sqrt(2))), abs=1e-15)

    def test_normal_quantile_inverts_erf(self):
        for p in (1e-6, 0.05, 0.5, 0.9, 0.999):
            root = optimize.brentq(lambda z: 0.5 * (1 + math.erf(z / math.sqrt(2))) - p, -10, 10,
                                   xtol=1e-14)
            assert normal_quantile(p) == pytest.approx(root, abs=1e-9)

    def test_normal_quantile_domain(self):
        for p in (0.0, 1.0, -0.1, float("nan")):
            with pytest.raises(InputError):
                normal_quantile(p)

    def test_chi2_sf_against_quadrature(self):
        for x, df in ((3.841458820694124, 1), (5.0, 3), (12.0, 7)):
            tail = integrate.quad(_chi2_pdf, x, np.inf, args=(df,))[0]
            assert chi2_sf(x, df) == pytest.approx(tail, rel=1e-8)
        assert chi2_sf(3.841458820694124, 1) == pytest.approx(0.05, abs=1e-10)

    def test_chi2_sf_bad_args(self):
        with pytest.raises(InputError):
            chi2_sf(1.0, 0)
        with pytest.raises(InputError):
            chi2_sf(-1.0, 2)

    def test_f_sf(self):
        # F(2, d2) has a closed-form tail (1 + 2x/d2)^(-d2/2)
        for x, d2 in ((0.5, 10), (3.0, 25), (7.2, 4)):
            assert f_sf(x, 2, d2) == pytest.approx((1 + 2 * x / d2) ** (-d2 / 2), rel=1e-10)
        assert f_sf(0.0, 3, 10) == 1.0
        assert f_sf(math.inf, 3, 10) == 0.0
        with pytest.raises(InputError):
            f_sf(1.0, 0, 10)

    def test_cauchy_round_trip(self):
        u = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(cauchy_cdf(cauchy_quantile(u)), u, atol=1e-12)
        assert cauchy_cdf(1.0) == pytest.approx(0.75)


class TestMvn:
    def test_univariate_exact(self):
        res = mvn_cdf([0.0], [[1.0]])
        assert res.probability == pytest.approx(0.5, abs=1e-12)

    def test_independent_orthant(self):
        assert mvn_cdf([0, 0], np.eye(2)).probability == pytest.approx(0.25, abs=1e-3)

    def test_equicorrelated_orthant(self):
        cov = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
        exact = 1 / 8 + 3 * math.asin(0.5) / (4 * math.pi)
        res = mvn_cdf([0, 0, 0], cov)
        assert res.probability == pytest.approx(exact, abs=1e-3)
        assert res.error_estimate < 1e-3

    def test_bivariate_against_scipy(self):
        from scipy.stats import multivariate_normal
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        upper = np.array([0.3, -0.4])
        ref = multivariate_normal(cov=cov).cdf(upper)
        assert mvn_cdf(upper, cov).probability == pytest.approx(ref, abs=2e-4)

    def test_duplicate_coordinate_matches_reduced(self):
        base = np.array([[1, .3, .3], [.3, 1, .3], [.3, .3, 1]])
        idx = [0, 1, 2, 2]
        full = mvn_cdf([0.1, 0.2, 0.5, 0.5], base[np.ix_(idx, idx)])
        reduced = mvn_cdf([0.1, 0.2, 0.5], base)
        assert full.rank == 3
        tol = max(full.error_estimate + reduced.error_estimate, 1e-12)
        assert abs(full.probability - reduced.probability) <= tol

    def test_perfectly_negative_pair(self):
        res = mvn_cdf([0.5, 0.5], [[1, -1], [-1, 1]])
        assert res.probability == pytest.approx(2 * normal_cdf(0.5) - 1, abs=1e-12)

    def test_zero_variance_component(self):
        cov = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert mvn_cdf([0.0, -0.1], cov).probability == 0.0
        assert mvn_cdf([0.0, 0.1], cov).probability == pytest.approx(0.5)

    def test_infinite_limits(self):
        assert mvn_cdf([np.inf, np.inf], np.eye(2)).probability == 1.0
        assert mvn_cdf([-np.inf, 1.0], np.eye(2)).probability == 0.0
        assert mvn_cdf([np.inf, 0.0], np.eye(2)).probability == pytest.approx(0.5)

    def test_deterministic_given_seed(self):
        cov = np.full((4, 4), 0.2) + 0.8 * np.eye(4)
        a = mvn_cdf(np.ones(4), cov, MvnConfig(seed=5))
        b = mvn_cdf(np.ones(4), cov, MvnConfig(seed=5))
        assert a == b

    def test_validation(self):
        with pytest.raises(InputError):
            mvn_cdf([0, 0], np.eye(3))
        with pytest.raises(InputError):
            mvn_cdf([0, 0], [[1, 0.5], [0.2, 1]])
        with pytest.raises(InputError):
            mvn_cdf([0, 0], [[1, 2], [2, 1]])
        with pytest.raises(BudgetExceeded):
            mvn_cdf(np.zeros(5), np.eye(5), max_dim=4)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=2, max_size=4),
           st.lists(st.floats(0.2, 2.0), min_size=4, max_size=4))
    def test_diagonal_covariance_is_a_product(self, upper, sd):
        m = len(upper)
        sd = np.asarray(sd[:m])
        exact = float(np.prod(normal_cdf(np.asarray(upper) / sd)))
        res = mvn_cdf(upper, np.diag(sd ** 2))
        assert res.probability == pytest.approx(exact, abs=1e-3)

    def test_monotone_in_upper_limit(self):
        rng = np.random.default_rng(4)
        b = rng.normal(size=(4, 3))
        cov = b @ b.T + 0.1 * np.eye(4)
        lo = mvn_cdf(np.zeros(4), cov, target_error=1e-5).probability
        hi = mvn_cdf(np.full(4, 0.3), cov, target_error=1e-5).probability
        assert hi > lo

    def test_permutation_invariance(self):
        rng = np.random.default_rng(9)
        b = rng.normal(size=(5, 5))
        cov = b @ b.T
        upper = rng.normal(size=5)
        perm = rng.permutation(5)
        a = mvn_cdf(upper, cov)
        c = mvn_cdf(upper[perm], cov[np.ix_(perm, perm)])
        assert a.probability == pytest.approx(c.probability, abs=a.error_estimate + c.error_estimate + 1e-4)
