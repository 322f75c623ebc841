import math
import time

import numpy as np
import pytest
from scipy import stats

from nomcor.core import (
    BudgetExceeded,
    DegenerateSampleError,
    InputError,
    Numbering,
    PairedSample,
    SampleKind,
    table_from_sample,
)
from nomcor.gamma_star import gamma_star_estimate
from nomcor.inference import (
    chi2_statistic,
    chi2_test_baseline,
    confidence_interval,
    f_statistic,
    f_test_baseline,
    independence_test,
    joint_covariance,
    kernel_estimates,
    sigma_gamma_hat,
)

from conftest import random_nominal_sample, random_real_sample


def _double_loop(xr, y):
    """tau, nu and 4 E[k_gamma^2] from all n^2 ordered pairs."""
    n = len(xr)
    sx = np.sign(xr[:, None] - xr[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    h = sx * sy
    tie = ((sx == 0) | (sy == 0)).astype(float)
    tau = h.sum() / (n * (n - 1))
    nu = (tie.sum() - n) / (n * (n - 1))
    k_tau = h.mean(axis=1) - h.mean()
    k_nu = tie.mean(axis=1) - tie.mean()
    g = tau / (1 - nu)
    k_gamma = (k_tau + g * k_nu) / (1 - nu)
    return tau, nu, 4 * np.mean(k_gamma ** 2), k_tau


def _random_numbering(rng, s):
    px = tuple(int(v) + 1 for v in rng.permutation(s.k))
    py = None if s.kind is SampleKind.NOMINAL_REAL else tuple(int(v) + 1 for v in rng.permutation(s.l))
    return Numbering(px, py)


def _ranked(s, nb):
    xr = nb.ranks_x()[s.x_codes()].astype(float)
    y = s.y if s.kind is SampleKind.NOMINAL_REAL else nb.ranks_y()[s.y_codes()].astype(float)
    return xr, np.asarray(y, dtype=float)


@pytest.mark.parametrize("maker", [random_real_sample, random_nominal_sample])
def test_kernels_match_double_loop(rng, maker):
    for _ in range(50):
        s = maker(rng)
        nb = _random_numbering(rng, s)
        try:
            ke = kernel_estimates(s, nb)
        except DegenerateSampleError:
            continue
        tau, nu, var, k_tau = _double_loop(*_ranked(s, nb))
        assert ke.tau_hat == pytest.approx(tau, abs=1e-12)
        assert ke.nu_hat == pytest.approx(nu, abs=1e-12)
        np.testing.assert_allclose(ke.k1_tau, k_tau, atol=1e-12)
        assert sigma_gamma_hat(s, nb) ** 2 == pytest.approx(var, abs=1e-12)


def test_kernels_are_centred(rng):
    for maker in (random_real_sample, random_nominal_sample):
        s = maker(rng)
        ke = kernel_estimates(s, _random_numbering(rng, s))
        assert abs(ke.k1_tau.mean()) < 1e-10
        assert abs(ke.k1_nu.mean()) < 1e-10
        assert ke.k1_tau.shape == (s.n,)


def test_two_point_sample():
    s = PairedSample.nominal_real(["A", "B"], [1.0, 2.0])
    ke = kernel_estimates(s, Numbering((1, 2)))
    assert ke.tau_hat == 1.0 and ke.nu_hat == 0.0
    np.testing.assert_allclose(ke.k1_tau, [0.0, 0.0], atol=1e-15)


def test_wrong_numbering_size():
    s = PairedSample.nominal_real(["A", "B", "C"], [1.0, 2.0, 3.0])
    with pytest.raises(InputError):
        kernel_estimates(s, Numbering((1, 2)))


def test_all_tied_is_degenerate():
    s = PairedSample.nominal_real(["A", "A", "A"], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateSampleError):
        sigma_gamma_hat(s, Numbering((1,)))


def test_comonotonic_sample_has_zero_variance_and_point_interval():
    x = ["A"] * 5 + ["B"] * 3 + ["C"] * 4
    y = ["a"] * 5 + ["b"] * 3 + ["c"] * 4
    s = PairedSample.nominal_nominal(x, y)
    assert sigma_gamma_hat(s, Numbering((1, 2, 3), (1, 2, 3))) < 1e-8
    rep = confidence_interval(s)
    assert rep.gamma_star == 1.0
    assert rep.ci == (1.0, 1.0)


def test_lower_limit_clipped():
    # alternating groups on 0..19: gamma*-hat = 0.1 with a wide interval
    s = PairedSample.nominal_real(list("AB" * 10), list(range(20)))
    rep = confidence_interval(s, 0.9)
    assert rep.gamma_star == pytest.approx(0.1)
    assert rep.gamma_star - 1.645 * rep.std_error < 0
    assert rep.ci[0] == 0.0
    assert rep.ci[0] <= rep.gamma_star <= rep.ci[1] <= 1.0


def test_interval_width_follows_level(rng):
    x = rng.choice(list("ABC"), 300)
    y = rng.normal(size=300) + (x == "B")
    s = PairedSample.nominal_real(x, y)
    narrow, wide = confidence_interval(s, 0.5), confidence_interval(s, 0.95)
    assert wide.ci[1] - wide.ci[0] > narrow.ci[1] - narrow.ci[0]
    z = stats.norm.ppf(0.975)
    assert wide.ci[1] == pytest.approx(min(wide.gamma_star + z * wide.std_error, 1.0))
    with pytest.raises(InputError):
        confidence_interval(s, 1.5)


def test_sigma_invariant_under_relabelling(rng):
    s = random_real_sample(rng, k_max=4)
    nb = _random_numbering(rng, s)
    rename = {lab: f"q{len(s.x_labels) - i}" for i, lab in enumerate(s.x_labels)}
    renamed = PairedSample.nominal_real([rename[v] for v in s.x], s.y)
    # the new sorted order reverses the old one, so ranks travel with the labels
    nb_renamed = Numbering(tuple(reversed(nb.perm_x)))
    assert sigma_gamma_hat(renamed, nb_renamed) == pytest.approx(sigma_gamma_hat(s, nb), abs=1e-12)


class TestJointCovariance:
    def test_dimension_and_diagonal(self, rng):
        s = random_real_sample(rng, k_max=4)
        jc = joint_covariance(s)
        assert jc.dimension == math.factorial(s.k)
        np.testing.assert_allclose(jc.sigma, jc.sigma.T, atol=1e-8)
        for i, nb in jc.numbering_index().items():
            assert jc.sigma[i, i] == pytest.approx(sigma_gamma_hat(s, nb) ** 2, abs=1e-10)

    def test_case2_dimension(self, rng):
        s = random_nominal_sample(rng, k_max=3)
        jc = joint_covariance(s)
        assert jc.dimension == math.factorial(s.k) * math.factorial(s.l)

    def test_complement_is_negatively_correlated(self, rng):
        s = random_real_sample(rng, k_max=4)
        jc = joint_covariance(s)
        index = {nb: i for i, nb in enumerate(jc.numberings)}
        for i, nb in enumerate(jc.numberings):
            j = index[nb.complement_x()]
            assert jc.sigma[i, j] == pytest.approx(-jc.sigma[i, i], abs=1e-8)

    def test_max_of_gammas_is_estimator(self, rng):
        for maker in (random_real_sample, random_nominal_sample):
            s = maker(rng, k_max=4)
            jc = joint_covariance(s)
            assert jc.gamma_hat.max() == pytest.approx(gamma_star_estimate(s).value, abs=1e-12)

    def test_positive_semidefinite(self, rng):
        for i in range(50):
            s = random_nominal_sample(rng, k_max=3) if i % 2 else random_real_sample(rng, k_max=4)
            try:
                jc = joint_covariance(s)
            except DegenerateSampleError:
                continue
            vals = np.linalg.eigvalsh(jc.sigma)
            assert vals.min() > -1e-10 * max(1.0, vals.max())

    def test_budget(self):
        labels = [f"c{i}" for i in range(7)]
        s = PairedSample.nominal_real(labels * 2, np.arange(14.0))
        with pytest.raises(BudgetExceeded):
            joint_covariance(s)
        s2 = PairedSample.nominal_nominal(labels[:5] * 2, ["a", "b"] * 5)
        with pytest.raises(BudgetExceeded):
            joint_covariance(s2)


class TestIndependenceTest:
    def test_identical_labels_reject(self):
        rng = np.random.default_rng(2)
        x = rng.choice(list("ABC"), 100)
        rep = independence_test(PairedSample.nominal_nominal(x, x))
        assert rep.p_value < 0.001

    def test_p_value_range_and_report(self, rng):
        for maker in (random_real_sample, random_nominal_sample):
            s = maker(rng, k_max=3)
            rep = independence_test(s)
            assert 0.0 <= rep.p_value <= 1.0
            assert rep.test_statistic == pytest.approx(math.sqrt(s.n) * rep.gamma_star)
            assert rep.mvn_error is not None

    def test_three_by_three_is_fast(self, rng):
        x = rng.choice(list("ABC"), 800)
        y = rng.choice(list("abc"), 800)
        start = time.perf_counter()
        rep = independence_test(PairedSample.nominal_nominal(x, y))
        assert time.perf_counter() - start < 10
        assert 0.0 <= rep.p_value <= 1.0


class TestBaselines:
    def test_f_matches_one_way_anova(self, rng):
        x = rng.choice(list("ABCD"), 90)
        y = rng.normal(size=90) + 0.3 * (x == "A")
        s = PairedSample.nominal_real(x, y)
        ref = stats.f_oneway(*[y[x == g] for g in "ABCD"])
        stat, d1, d2 = f_statistic(s)
        assert (d1, d2) == (3, 86)
        assert stat == pytest.approx(ref.statistic, rel=1e-10)
        assert f_test_baseline(s) == pytest.approx(ref.pvalue, rel=1e-8)

    def test_constant_y(self):
        s = PairedSample.nominal_real(list("ABAB"), [2.0] * 4)
        assert f_statistic(s)[0] == 0.0
        assert f_test_baseline(s) == 1.0

    def test_group_shift_detected(self, rng):
        x = np.repeat(["A", "B"], 500)
        y = rng.normal(size=1000) + (x == "B")
        assert f_test_baseline(PairedSample.nominal_real(x, y)) < 1e-10

    def test_f_design_checks(self):
        with pytest.raises(InputError):
            f_statistic(PairedSample.nominal_real(["A", "B"], [1.0, 2.0]))
        with pytest.raises(InputError):
            f_statistic(PairedSample.nominal_real(["A", "A", "A"], [1.0, 2.0, 3.0]))

    def test_single_observation_category_allowed(self):
        s = PairedSample.nominal_real(["A", "A", "A", "B"], [1.0, 2.0, 3.0, 9.0])
        assert 0.0 <= f_test_baseline(s) <= 1.0

    def test_chi2_matches_scipy(self, rng):
        s = random_nominal_sample(rng, n_max=200)
        cells = table_from_sample(s).counts()
        ref = stats.chi2_contingency(cells, correction=False)
        stat, df = chi2_statistic(s)
        assert stat == pytest.approx(ref[0], rel=1e-10)
        assert df == ref[2]
        assert chi2_test_baseline(s) == pytest.approx(ref[1], rel=1e-8)

    def test_chi2_needs_nominal(self):
        with pytest.raises(InputError):
            chi2_statistic(PairedSample.nominal_real(["A", "B"], [1.0, 2.0]))
