"""Probability kernels: univariate distribution functions and a multivariate
normal CDF by randomised quasi-Monte-Carlo.

The MVN integrator follows the separation-of-variables transformation
(Genz 1992) with smallest-probability-first variable ordering, a pivoted
Cholesky factor that tolerates singular covariances, and a randomly shifted
Richtmyer lattice with the baker's transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import BudgetExceeded, InputError

MAX_MVN_DIM = 720


def normal_cdf(z):
    return special.ndtr(z)


def normal_quantile(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)) or np.any(~np.isfinite(p_arr)):
        raise InputError("normal_quantile needs p strictly inside (0, 1)")
    out = special.ndtri(p_arr)
    return float(out) if out.ndim == 0 else out


def chi2_sf(x: float, df: int) -> float:
    if df < 1 or int(df) != df:
        raise InputError(f"invalid degrees of freedom {df}")
    if x < 0:
        raise InputError("chi2_sf needs x >= 0")
    return float(special.chdtrc(df, x))


def f_sf(x: float, d1: int, d2: int) -> float:
    if d1 < 1 or d2 < 1:
        raise InputError(f"invalid degrees of freedom ({d1}, {d2})")
    if x < 0:
        raise InputError("f_sf needs x >= 0")
    if math.isinf(x):
        return 0.0
    return float(special.fdtrc(d1, d2, x))


def cauchy_cdf(x):
    return 0.5 + np.arctan(x) / np.pi


def cauchy_quantile(u):
    return np.tan(np.pi * (np.asarray(u) - 0.5))


@dataclass(frozen=True)
class MvnCdfResult:
    probability: float
    error_estimate: float
    points_used: int
    rank: int = 0


@dataclass(frozen=True)
class MvnConfig:
    target_error: float = 1e-4
    max_points: int = 2 ** 17
    randomizations: int = 12
    seed: int = 0
    initial_points: int = 2 ** 9


def _primes(count: int) -> np.ndarray:
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    limit = max(16, int(count * (math.log(count + 1) + math.log(math.log(count + 2)) + 3)))
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(limit ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i::i] = False
    return np.nonzero(sieve)[0][:count]


def _truncated_mean(lo: float, hi: float) -> float:
    pl, ph = special.ndtr(lo), special.ndtr(hi)
    mass = ph - pl
    if mass < 1e-300:
        if math.isinf(hi):
            return lo
        if math.isinf(lo):
            return hi
        return 0.5 * (lo + hi)
    dens = (0.0 if math.isinf(lo) else math.exp(-0.5 * lo * lo)) - \
        (0.0 if math.isinf(hi) else math.exp(-0.5 * hi * hi))
    return dens / math.sqrt(2 * math.pi) / mass


class _Plan:
    """Integration plan: one group of linear constraints per latent variable."""

    def __init__(self, upper: np.ndarray, cov: np.ndarray):
        m = upper.size
        scale = float(np.trace(cov))
        tol = 1e-10 * scale if scale > 0 else 0.0
        chol = np.zeros((m, m))
        resid = np.diag(cov).astype(float).copy()
        remaining = list(range(m))
        pivots: list[int] = []
        expect: list[float] = []
        for col in range(m):
            cand = [i for i in remaining if resid[i] > tol]
            if not cand:
                break
            cand_arr = np.array(cand)
            shift = chol[cand_arr, :col] @ np.array(expect) if col else np.zeros(len(cand))
            lim = (upper[cand_arr] - shift) / np.sqrt(resid[cand_arr])
            best = int(cand_arr[int(np.argmin(special.ndtr(lim)))])
            best_lim = float(lim[int(np.argmin(special.ndtr(lim)))])
            remaining.remove(best)
            pivots.append(best)
            piv = math.sqrt(resid[best])
            chol[best, col] = piv
            if remaining:
                rem = np.array(remaining)
                chol[rem, col] = (cov[rem, best] - chol[rem, :col] @ chol[best, :col]) / piv
                resid[rem] -= chol[rem, col] ** 2
            expect.append(_truncated_mean(-math.inf, best_lim))
        self.rank = len(pivots)
        self.impossible = False
        groups: list[list[int]] = [[] for _ in range(self.rank)]
        for p_idx, p in enumerate(pivots):
            groups[p_idx].append(p)
        for i in remaining:
            row = chol[i, : self.rank]
            sig = np.nonzero(np.abs(row) > 1e-8 * math.sqrt(max(cov[i, i], tol, 1e-300)))[0]
            if sig.size == 0:
                # a (numerically) constant zero component
                if upper[i] < 0:
                    self.impossible = True
                continue
            groups[int(sig[-1])].append(i)
        self.steps = []
        for t, rows in enumerate(groups):
            rows_arr = np.array(rows, dtype=np.intp)
            coef = chol[rows_arr, t]
            self.steps.append((upper[rows_arr], chol[rows_arr, :t], coef))

    def _bounds(self, t: int, w: np.ndarray | None, npts: int):
        u, b, coef = self.steps[t]
        if t and w is not None:
            rhs = u[:, None] - b @ w[:t]
        else:
            rhs = np.repeat(u[:, None], npts, axis=1)
        lim = rhs / coef[:, None]
        pos = coef > 0
        hi = lim[pos].min(axis=0) if pos.any() else np.full(npts, np.inf)
        lo = lim[~pos].max(axis=0) if (~pos).any() else np.full(npts, -np.inf)
        return lo, hi

    def integrand(self, z: np.ndarray) -> np.ndarray:
        """``z`` has shape (rank - 1, N) with entries in [0, 1]."""
        npts = z.shape[1] if z.ndim == 2 and z.shape[0] else 1
        f = np.ones(npts)
        w = np.zeros((max(self.rank - 1, 0), npts))
        for t in range(self.rank):
            lo, hi = self._bounds(t, w if t else None, npts)
            plo, phi = special.ndtr(lo), special.ndtr(hi)
            e = np.clip(phi - plo, 0.0, 1.0)
            f *= e
            if t < self.rank - 1:
                arg = np.clip(plo + z[t] * e, 1e-16, 1 - 1e-16)
                w[t] = special.ndtri(arg)
        return f


def mvn_cdf(upper, cov, config: MvnConfig | None = None, *, max_dim: int = MAX_MVN_DIM,
            **overrides) -> MvnCdfResult:
    """``P(Z <= upper)`` componentwise for ``Z ~ N(0, cov)``.

    ``cov`` may be singular; directions with eigenvalue below ``1e-10 * trace``
    are handled as exact linear constraints.  Results are deterministic for a
    given seed.
    """
    config = config or MvnConfig()
    if overrides:
        config = MvnConfig(**{**config.__dict__, **overrides})
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    m = upper.size
    if cov.shape != (m, m):
        raise InputError(f"covariance has shape {cov.shape}, expected ({m}, {m})")
    if m > max_dim:
        raise BudgetExceeded(
            f"MVN dimension {m} exceeds {max_dim}; use a cheaper independence test "
            f"(e.g. chi-square or F) for tables this large"
        )
    if np.any(np.isnan(upper)) or not np.all(np.isfinite(cov)):
        raise InputError("non-finite input")
    scale = max(1.0, float(np.abs(np.diag(cov)).max()))
    if np.abs(cov - cov.T).max() > 1e-8 * scale:
        raise InputError("covariance is not symmetric")
    cov = 0.5 * (cov + cov.T)
    trace = float(np.trace(cov))
    if m > 1:
        lam_min = float(np.linalg.eigvalsh(cov)[0])
        if lam_min < -1e-8 * max(trace, 1e-300):
            raise InputError(f"covariance has a negative eigenvalue {lam_min:.3g}")
    if np.any(upper == -np.inf):
        return MvnCdfResult(0.0, 0.0, 0, 0)
    keep = np.isfinite(upper)
    if not keep.any():
        return MvnCdfResult(1.0, 0.0, 0, 0)
    upper, cov = upper[keep], cov[np.ix_(keep, keep)]

    plan = _Plan(upper, cov)
    if plan.impossible:
        return MvnCdfResult(0.0, 0.0, 0, plan.rank)
    if plan.rank == 0:
        return MvnCdfResult(1.0, 0.0, 0, 0)
    dims = plan.rank - 1
    if dims == 0:
        value = float(plan.integrand(np.zeros((0, 1)))[0])
        return MvnCdfResult(min(max(value, 0.0), 1.0), 0.0, 1, plan.rank)

    rng = np.random.default_rng(config.seed)
    shifts = rng.random((config.randomizations, dims))
    gen = np.sqrt(_primes(dims).astype(float))
    gen -= np.floor(gen)
    sums = np.zeros(config.randomizations)
    used = 0
    target_n = config.initial_points
    while True:
        idx = np.arange(used + 1, target_n + 1, dtype=float)
        base = np.outer(gen, idx) % 1.0
        for r in range(config.randomizations):
            pts = (base + shifts[r][:, None]) % 1.0
            pts = np.abs(2.0 * pts - 1.0)
            sums[r] += plan.integrand(pts).sum()
        used = target_n
        means = sums / used
        est = float(means.mean())
        err = 3.0 * float(means.std(ddof=1)) / math.sqrt(config.randomizations)
        if err <= config.target_error or used >= config.max_points:
            break
        target_n = min(2 * used, config.max_points)
    return MvnCdfResult(min(max(est, 0.0), 1.0), err, used * config.randomizations, plan.rank)
