"""Asymptotic inference for gamma*: variance, confidence intervals, the
independence test over all numberings, and two classical baseline tests.

Variances come from the first-order projections of the U-statistics behind
tau and nu, evaluated with the empirical distribution.  The tau projection
uses the mid-distribution function, which makes it equal to
``E[sgn(x - X) sgn(y - Y)] - tau`` and therefore handles ties exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    BudgetExceeded,
    ContingencyTable,
    DegenerateSampleError,
    InputError,
    Numbering,
    PairedSample,
    SampleKind,
    TableMode,
    table_from_sample,
)
from .distributions import MvnConfig, chi2_sf, f_sf, mvn_cdf, normal_quantile
from .gamma_star import DEFAULT_MAX_CATEGORIES, DEFAULT_MAX_K, gamma_star_estimate, orderings

JOINT_MAX_K = 6
JOINT_MAX_CATEGORIES = 4


@dataclass(frozen=True)
class KernelEstimates:
    """Centred per-observation projections for one numbering."""

    k1_tau: np.ndarray
    k1_nu: np.ndarray
    tau_hat: float
    nu_hat: float
    numbering: Numbering

    @property
    def gamma_hat(self) -> float:
        return self.tau_hat / (1.0 - self.nu_hat)


@dataclass(frozen=True)
class JointCovariance:
    sigma: np.ndarray
    numberings: tuple[Numbering, ...]
    gamma_hat: np.ndarray

    @property
    def dimension(self) -> int:
        return self.sigma.shape[0]

    def numbering_index(self) -> dict[int, Numbering]:
        return dict(enumerate(self.numberings))


@dataclass
class InferenceReport:
    gamma_star: float
    sigma: float
    std_error: float
    ci: tuple[float, float]
    level: float
    n: int
    argmax: Numbering
    argmax_count: int
    ordered_labels: dict
    test_statistic: float | None = None
    p_value: float | None = None
    mvn_error: float | None = None
    mvn_rank: int | None = None
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["ci"] = list(self.ci)
        out["argmax"] = {"x": list(self.argmax.perm_x),
                         "y": None if self.argmax.perm_y is None else list(self.argmax.perm_y)}
        return out


# --- unit representation ------------------------------------------------------------
#
# A "unit" is one observation (nominal-real) or one occupied cell (nominal-nominal),
# carrying weight 1/n or n_ab/n.  For every unit and numbering we need
#   S = sum_j sgn(rx_i - rx_j) sgn(y_i - y_j)   (over all observations j)
#   T = #{j: x_j = x_i} + #{j: y_j = y_i} - #{j: both equal}.


def _sign_tensor(ranks: np.ndarray) -> np.ndarray:
    """``out[q, a, c] = sgn(ranks[q, a] - ranks[q, c])``."""
    return np.sign(ranks[:, :, None] - ranks[:, None, :]).astype(float)


def _ranks_of(orders: np.ndarray) -> np.ndarray:
    m, k = orders.shape
    ranks = np.empty_like(orders)
    ranks[np.arange(m)[:, None], orders] = np.arange(k)
    return ranks


def _units_real(s: PairedSample, ranks_x: np.ndarray):
    codes = s.x_codes()
    y = np.asarray(s.y, dtype=float)
    n, k = y.size, s.k
    diff = np.zeros((n, k))
    same_cell = np.zeros(n)
    for c in range(k):
        yc = np.sort(y[codes == c])
        lo = np.searchsorted(yc, y, side="left")
        hi = np.searchsorted(yc, y, side="right")
        diff[:, c] = lo - (yc.size - hi)
        mine = codes == c
        same_cell[mine] = (hi - lo)[mine]
    signs = _sign_tensor(ranks_x)          # (m, k, k)
    S = np.empty((n, ranks_x.shape[0]))
    for a in range(k):
        rows = codes == a
        S[rows] = diff[rows] @ signs[:, a, :].T
    _, inv, ycount = np.unique(y, return_inverse=True, return_counts=True)
    xcount = np.bincount(codes, minlength=k)[codes]
    T = xcount + ycount[inv] - same_cell
    return S, T.astype(float), np.full(n, 1.0 / n), n


def _units_nominal(s: PairedSample, ranks_x: np.ndarray, ranks_y: np.ndarray):
    t = table_from_sample(s)
    cells = t.counts().astype(float)
    n = float(cells.sum())
    sx = _sign_tensor(ranks_x)              # (mx, k, k)
    sy = _sign_tensor(ranks_y)              # (my, l, l)
    a_part = np.einsum("qac,cd->qad", sx, cells)
    K = np.einsum("qad,pbd->qpab", a_part, sy)
    rows, cols = np.nonzero(cells)
    S = K[:, :, rows, cols].reshape(-1, rows.size).T   # (units, mx*my)
    T = cells.sum(1)[rows] + cells.sum(0)[cols] - cells[rows, cols]
    return S, T, cells[rows, cols] / n, int(n)


def _units(s: PairedSample, ranks_x: np.ndarray, ranks_y: np.ndarray | None):
    if s.kind == SampleKind.NOMINAL_REAL:
        return _units_real(s, ranks_x)
    return _units_nominal(s, ranks_x, ranks_y)


def _gamma_kernels(S, T, w, n):
    """Centred gamma projections per unit and numbering plus the point estimates."""
    tau = (w @ S) / (n - 1)
    nu = float((w @ T - 1.0) / (n - 1))
    if nu >= 1.0 - 1e-15:
        raise DegenerateSampleError("variance undefined: every pair is tied")
    k_tau = S / n - (w @ S) / n
    k_nu = T / n - (w @ T) / n
    gamma = tau / (1.0 - nu)
    k_gamma = (k_tau + gamma * k_nu[:, None]) / (1.0 - nu)
    return k_tau, k_nu, tau, nu, k_gamma


def _expand(values: np.ndarray, s: PairedSample) -> np.ndarray:
    """Map cell-level values back to observations (nominal-nominal only)."""
    t = table_from_sample(s)
    rows, cols = np.nonzero(t.counts())
    lookup = np.zeros(t.shape)
    lookup[rows, cols] = values
    return lookup[s.x_codes(), s.y_codes()]


def _numbering_ranks(s: PairedSample, numbering: Numbering):
    rx = numbering.ranks_x()
    if rx.size != s.k:
        raise InputError(f"numbering ranks {rx.size} x-categories, sample has {s.k}")
    ry = None
    if s.kind == SampleKind.NOMINAL_NOMINAL:
        ry = numbering.ranks_y()
        if ry is None or ry.size != s.l:
            raise InputError("nominal-nominal samples need a y numbering of matching size")
    return rx[None, :], None if ry is None else ry[None, :]


def kernel_estimates(s: PairedSample, numbering: Numbering) -> KernelEstimates:
    rx, ry = _numbering_ranks(s, numbering)
    S, T, w, n = _units(s, rx, ry)
    k_tau, k_nu, tau, nu, _ = _gamma_kernels(S, T, w, n)
    k_tau = k_tau[:, 0]
    if s.kind == SampleKind.NOMINAL_NOMINAL:
        k_tau, k_nu = _expand(k_tau, s), _expand(k_nu, s)
    return KernelEstimates(k_tau, k_nu, float(tau[0]), nu, numbering)


def sigma_gamma_hat(s: PairedSample, numbering: Numbering) -> float:
    """Plug-in asymptotic standard deviation of sqrt(n) (gamma_hat - gamma)."""
    rx, ry = _numbering_ranks(s, numbering)
    S, T, w, n = _units(s, rx, ry)
    *_, k_gamma = _gamma_kernels(S, T, w, n)
    var = 4.0 * float(w @ k_gamma[:, 0] ** 2)
    # kernels are O(1); anything this small is cancellation error
    return math.sqrt(var) if var > 1e-24 else 0.0


def _check_level(level: float) -> None:
    if not (0.0 < level < 1.0):
        raise InputError(f"confidence level must lie in (0, 1), got {level}")


def confidence_interval(s: PairedSample, level: float = 0.9, *, max_k: int = DEFAULT_MAX_K,
                        max_categories: int = DEFAULT_MAX_CATEGORIES) -> InferenceReport:
    """Normal interval around gamma*-hat, clipped to [0, 1].

    The standard error is evaluated at the numbering the estimator picked; the
    interval is only valid when the population maximiser is unique.
    """
    _check_level(level)
    est = gamma_star_estimate(s, max_k=max_k, max_categories=max_categories)
    sigma = sigma_gamma_hat(s, est.argmax)
    se = sigma / math.sqrt(s.n)
    z = normal_quantile(1.0 - (1.0 - level) / 2.0)
    lo = max(est.value - z * se, 0.0)
    hi = min(est.value + z * se, 1.0)
    notes = []
    if est.argmax_count > 1:
        notes.append(f"{est.argmax_count} numberings attain the maximum")
    return InferenceReport(
        gamma_star=float(est.value), sigma=sigma, std_error=se, ci=(lo, hi), level=level,
        n=s.n, argmax=est.argmax, argmax_count=est.argmax_count,
        ordered_labels=est.ordered_labels(), notes=notes,
    )


def joint_covariance(s: PairedSample, *, max_k: int = JOINT_MAX_K,
                     max_categories: int = JOINT_MAX_CATEGORIES) -> JointCovariance:
    """Estimated covariance of sqrt(n) gamma_hat across every numbering.

    Index order: x-orderings in lexicographic order (outer) and, for two
    nominal variables, y-orderings (inner).
    """
    if s.kind == SampleKind.NOMINAL_REAL:
        if s.k > max_k:
            raise BudgetExceeded(
                f"{s.k} categories need {math.factorial(s.k):,} numberings; "
                f"the joint covariance allows at most {max_k} categories")
        ox, oy = orderings(s.k), None
        rx, ry = _ranks_of(ox), None
        numberings = tuple(Numbering.from_orders(o) for o in ox)
    else:
        if s.k > max_categories or s.l > max_categories:
            raise BudgetExceeded(
                f"a {s.k}x{s.l} table needs {math.factorial(s.k) * math.factorial(s.l):,} "
                f"numberings; the joint covariance allows at most {max_categories} per variable")
        ox, oy = orderings(s.k), orderings(s.l)
        rx, ry = _ranks_of(ox), _ranks_of(oy)
        numberings = tuple(Numbering.from_orders(a, b) for a in ox for b in oy)
    S, T, w, n = _units(s, rx, ry)
    *_, tau, nu, k_gamma = _gamma_kernels(S, T, w, n)
    sigma = 4.0 * (k_gamma * w[:, None]).T @ k_gamma
    sigma = 0.5 * (sigma + sigma.T)
    return JointCovariance(sigma, numberings, tau / (1.0 - nu))


def _psd(sigma: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def independence_test(s: PairedSample, level: float = 0.9, *, seed: int = 0,
                      mvn: MvnConfig | None = None, max_k: int = JOINT_MAX_K,
                      max_categories: int = JOINT_MAX_CATEGORIES) -> InferenceReport:
    """Test of independence based on sqrt(n) gamma*-hat.

    Under independence the statistic behaves like the maximum of a centred
    normal vector over all numberings, so ``p = 1 - P(max <= stat)``.  The
    returned report also carries the confidence interval at ``level``.
    """
    report = confidence_interval(s, level, max_k=max_k, max_categories=max_categories)
    joint = joint_covariance(s, max_k=max_k, max_categories=max_categories)
    cov = _psd(joint.sigma)
    if not np.any(np.diag(cov) > 0):
        raise DegenerateSampleError("estimated covariance vanishes for every numbering")
    stat = math.sqrt(s.n) * report.gamma_star
    config = mvn or MvnConfig(seed=seed)
    res = mvn_cdf(np.full(joint.dimension, stat), cov, config)
    report.test_statistic = stat
    report.p_value = float(min(max(1.0 - res.probability, 0.0), 1.0))
    report.mvn_error = res.error_estimate
    report.mvn_rank = res.rank
    return report


# --- baselines ----------------------------------------------------------------------


def f_statistic(s: PairedSample) -> tuple[float, int, int]:
    """One-way F statistic from regressing y on indicators of the x categories."""
    if s.kind != SampleKind.NOMINAL_REAL:
        raise InputError("the F test needs a real-valued y")
    n, k = s.n, s.k
    if k < 2:
        raise InputError("the F test needs at least 2 categories")
    if n <= k:
        raise InputError(f"singular design: {n} observations for {k} categories")
    y = np.asarray(s.y, dtype=float)
    design = np.zeros((n, k))
    design[:, 0] = 1.0
    codes = s.x_codes()
    rows = codes > 0
    design[np.nonzero(rows)[0], codes[rows]] = 1.0
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    rss1 = float(((y - design @ coef) ** 2).sum())
    rss0 = float(((y - y.mean()) ** 2).sum())
    explained = max(rss0 - rss1, 0.0)
    if explained <= 1e-14 * max(rss0, 1e-300) or rss0 == 0.0:
        return 0.0, k - 1, n - k
    if rss1 <= 1e-14 * rss0:
        return math.inf, k - 1, n - k
    return (explained / (k - 1)) / (rss1 / (n - k)), k - 1, n - k


def f_test_baseline(s: PairedSample) -> float:
    stat, d1, d2 = f_statistic(s)
    return f_sf(stat, d1, d2)


def chi2_statistic(data: PairedSample | ContingencyTable) -> tuple[float, int]:
    t = table_from_sample(data) if isinstance(data, PairedSample) else data
    if isinstance(data, PairedSample) and data.kind != SampleKind.NOMINAL_NOMINAL:
        raise InputError("the chi-square test needs two nominal variables")
    if t.mode != TableMode.COUNTS:
        raise InputError("the chi-square test needs counts")
    obs = t.counts().astype(float)
    a, b = obs.shape
    if a < 2 or b < 2:
        raise InputError(f"the chi-square test needs at least a 2x2 table, got {a}x{b}")
    expected = np.outer(obs.sum(1), obs.sum(0)) / obs.sum()
    if np.any(expected <= 0):
        raise InputError("expected cell count is zero")
    return float(((obs - expected) ** 2 / expected).sum()), (a - 1) * (b - 1)


def chi2_test_baseline(data: PairedSample | ContingencyTable) -> float:
    stat, df = chi2_statistic(data)
    return chi2_sf(stat, df)
