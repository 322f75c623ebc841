"""Concordant / discordant / tie counting and the plain gamma statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContingencyTable, DegenerateSampleError, InputError, Numbering, PairCounts


@dataclass(frozen=True)
class GammaComponents:
    tau_hat: float
    nu_hat: float
    gamma_hat: float


def count_pairs_reference(x, y) -> PairCounts:
    """Classify all unordered pairs by brute force, O(n^2).

    Kept deliberately simple: this is the oracle the fast paths are checked
    against.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("x and y must be 1-d sequences of equal length")
    n = x.size
    if n < 2:
        raise InputError("need at least 2 observations")
    conc = disc = tx = ty = tb = 0
    for i in range(n - 1):
        dx = np.sign(x[i] - x[i + 1:])
        dy = np.sign(y[i] - y[i + 1:])
        prod = dx * dy
        conc += int(np.count_nonzero(prod > 0))
        disc += int(np.count_nonzero(prod < 0))
        zx, zy = dx == 0, dy == 0
        tb += int(np.count_nonzero(zx & zy))
        tx += int(np.count_nonzero(zx & ~zy))
        ty += int(np.count_nonzero(~zx & zy))
    return PairCounts(conc, disc, tx, ty, tb, n * (n - 1) // 2)


def _ranked_counts(t: ContingencyTable, numbering: Numbering) -> np.ndarray:
    counts = t.counts()
    k, l = counts.shape  # noqa: E741
    rx = numbering.ranks_x()
    ry = numbering.ranks_y()
    if ry is None:
        ry = np.arange(l)
    if rx.size != k or ry.size != l:
        raise InputError(f"numbering of size ({rx.size}, {ry.size}) does not fit a {k}x{l} table")
    ordered = np.zeros_like(counts)
    ordered[np.ix_(rx, ry)] = counts
    return ordered


def count_pairs_table(t: ContingencyTable, numbering: Numbering) -> PairCounts:
    """Pair counts of a counts table under a numbering in O(kl).

    Uses the south-east / south-west accumulators: ``B[i, j]`` is the mass
    strictly below row i in column j and ``SE[i, j] = sum_{j' > j} B[i, j']``,
    so that ``C = sum n_ij SE_ij``.
    """
    nij = _ranked_counts(t, numbering)
    k, l = nij.shape  # noqa: E741
    below = np.zeros_like(nij)
    for i in range(k - 2, -1, -1):
        below[i] = below[i + 1] + nij[i + 1]
    se = np.zeros_like(nij)
    sw = np.zeros_like(nij)
    for j in range(l - 2, -1, -1):
        se[:, j] = se[:, j + 1] + below[:, j + 1]
    for j in range(1, l):
        sw[:, j] = sw[:, j - 1] + below[:, j - 1]
    conc = int((nij * se).sum())
    disc = int((nij * sw).sum())
    n = int(nij.sum())
    ties_both = int((nij * (nij - 1) // 2).sum())
    rows = nij.sum(axis=1)
    cols = nij.sum(axis=0)
    ties_x = int((rows * (rows - 1) // 2).sum()) - ties_both
    ties_y = int((cols * (cols - 1) // 2).sum()) - ties_both
    return PairCounts(conc, disc, ties_x, ties_y, ties_both, n * (n - 1) // 2)


def gamma_components(pc: PairCounts) -> GammaComponents:
    if pc.total_pairs <= 0:
        raise InputError("no pairs to classify")
    if pc.untied == 0:
        raise DegenerateSampleError("gamma undefined: all pairs tied")
    tau = (pc.concordant - pc.discordant) / pc.total_pairs
    nu = pc.tied / pc.total_pairs
    gamma = (pc.concordant - pc.discordant) / pc.untied
    return GammaComponents(tau, nu, gamma)
