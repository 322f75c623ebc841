"""Classical association measures for two discrete variables.

All functions accept counts or probability tables; counts are normalised
first.  None of these measures is proper: they can only reach 1 for special
marginals, and they need both variables to be discrete.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import ContingencyTable, InputError


@dataclass(frozen=True)
class ClassicalReport:
    msc: float
    cramers_v: float
    tschuprow_t: float
    pearson_c: float
    sakoda_s: float
    lambda_x: float
    lambda_y: float
    lambda_sym: float
    gk_tau_x: float
    gk_tau_y: float
    gk_tau_sym: float
    uncertainty: float

    def as_dict(self) -> dict:
        return asdict(self)


def _probs(t: ContingencyTable, min_dim: int = 2) -> np.ndarray:
    p = t.probabilities()
    a, b = p.shape
    if a < min_dim or b < min_dim:
        raise InputError(f"classical measures need at least a {min_dim}x{min_dim} table, got {a}x{b}")
    return p


def _unit(value: float) -> float:
    # rounding can push exact 0 / 1 slightly outside the unit interval
    return float(min(max(value, 0.0), 1.0))


def msc(t: ContingencyTable) -> float:
    """Mean square contingency ``sum p_ij^2 / (p_i. p_.j) - 1``."""
    p = _probs(t)
    pr, pc = p.sum(1), p.sum(0)
    if np.any(pr <= 0) or np.any(pc <= 0):
        raise InputError("zero marginal")
    value = float((p ** 2 / np.outer(pr, pc)).sum() - 1.0)
    # cancellation leaves ~1e-16 on independent tables, which the square
    # roots below would inflate to ~1e-8
    return value if value > 1e-13 else 0.0


def contingency_family(t: ContingencyTable) -> tuple[float, float, float, float]:
    """Cramer's V, Tschuprow's T, Pearson's C and Sakoda's S."""
    m = msc(t)
    a, b = t.shape
    v = np.sqrt(m / min(a - 1, b - 1))
    tt = np.sqrt(m / np.sqrt((a - 1) * (b - 1)))
    pc = np.sqrt(m / (1 + m))
    s = np.sqrt(m * min(a, b) / ((1 + m) * min(a - 1, b - 1)))
    return float(v), float(tt), float(pc), float(s)


def gk_lambda(t: ContingencyTable) -> tuple[float, float, float]:
    p = _probs(t)
    row_max = p.max(axis=1).sum()   # sum_i p_im
    col_max = p.max(axis=0).sum()   # sum_j p_mj
    pcm = p.sum(0).max()            # p_.m
    prm = p.sum(1).max()            # p_m.
    if pcm >= 1 or prm >= 1:
        raise InputError("degenerate marginal: one category has probability 1")
    lam_y = (row_max - pcm) / (1 - pcm)
    lam_x = (col_max - prm) / (1 - prm)
    lam = 0.5 * (row_max + col_max - pcm - prm) / (1 - 0.5 * (pcm + prm))
    return _unit(lam_x), _unit(lam_y), _unit(lam)


def gk_tau(t: ContingencyTable) -> tuple[float, float, float]:
    p = _probs(t)
    pr, pc = p.sum(1), p.sum(0)
    sy, sx = (pc ** 2).sum(), (pr ** 2).sum()
    if sy >= 1 or sx >= 1:
        raise InputError("degenerate marginal: one category has probability 1")
    by_row = (p ** 2 / pr[:, None]).sum()
    by_col = (p ** 2 / pc[None, :]).sum()
    tau_y = (by_row - sy) / (1 - sy)
    tau_x = (by_col - sx) / (1 - sx)
    tau = 0.5 * (by_row + by_col - sy - sx) / (1 - 0.5 * (sy + sx))
    return _unit(tau_x), _unit(tau_y), _unit(tau)


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def uncertainty(t: ContingencyTable) -> float:
    """Symmetric uncertainty coefficient with natural logarithms."""
    p = _probs(t)
    hx, hy, hxy = _entropy(p.sum(1)), _entropy(p.sum(0)), _entropy(p.ravel())
    if hx + hy <= 0:
        raise InputError("both marginals are degenerate")
    return _unit(2 * (hx + hy - hxy) / (hx + hy))


def classical_report(t: ContingencyTable) -> ClassicalReport:
    v, tt, pc, s = contingency_family(t)
    lx, ly, lam = gk_lambda(t)
    tx, ty, tau = gk_tau(t)
    return ClassicalReport(
        msc=msc(t), cramers_v=v, tschuprow_t=tt, pearson_c=pc, sakoda_s=s,
        lambda_x=lx, lambda_y=ly, lambda_sym=lam,
        gk_tau_x=tx, gk_tau_y=ty, gk_tau_sym=tau,
        uncertainty=uncertainty(t),
    )
