"""Exact maximisation of Goodman-Kruskal's gamma over category numberings.

Maximising gamma is the same as maximising the number of concordant pairs,
because ``C + D`` (pairs untied in both coordinates) does not depend on the
numbering.  With one nominal variable the maximum is found by a subset DP in
O(k 2^k); with two nominal variables every pair of orderings is evaluated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

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

DEFAULT_MAX_K = 25
DEFAULT_MAX_CATEGORIES = 8
_EXACT_FLOAT = 2 ** 53


@dataclass(frozen=True)
class GammaStarResult:
    value: float
    argmax: Numbering
    argmax_count: int
    concordant: float
    untied: float
    labels_x: tuple[str, ...] = ()
    labels_y: tuple[str, ...] | None = None

    def ordered_labels(self) -> dict:
        """Labels listed from lowest to highest assigned rank."""
        out = {"x": [self.labels_x[i] for i in self.argmax.order_x()]}
        if self.argmax.perm_y is not None and self.labels_y is not None:
            out["y"] = [self.labels_y[i] for i in self.argmax.order_y()]
        return out


# --- case 1: one nominal variable -------------------------------------------------


def build_h_matrix(s: PairedSample) -> np.ndarray:
    """``H[l, m] = #{(i, j): y_i < y_j, x_i = l, x_j = m}``, zero diagonal.

    Categories are indexed in lexicographic label order.
    """
    if s.kind != SampleKind.NOMINAL_REAL:
        raise InputError("the H matrix needs a nominal-real sample")
    codes = s.x_codes()
    y = np.asarray(s.y)
    k = s.k
    groups = [np.sort(y[codes == c]) for c in range(k)]
    h = np.zeros((k, k), dtype=np.int64)
    for a in range(k):
        for b in range(k):
            if a != b:
                h[a, b] = int(np.searchsorted(groups[a], groups[b], side="left").sum())
    return h


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a)


class _SubsetWeights:
    """``W(T, x) = sum_{x' in T} H[x', x]`` via two half-width lookup tables."""

    def __init__(self, h: np.ndarray):
        k = h.shape[0]
        self.lo_bits = k // 2
        self.lo_mask = (1 << self.lo_bits) - 1
        self.lo = [self._table(h[: self.lo_bits, x]) for x in range(k)]
        self.hi = [self._table(h[self.lo_bits:, x]) for x in range(k)]

    @staticmethod
    def _table(col: np.ndarray) -> np.ndarray:
        out = np.zeros(1, dtype=col.dtype)
        for v in col:
            out = np.concatenate([out, out + v])
        return out

    def __call__(self, subsets, x: int):
        return self.lo[x][subsets & self.lo_mask] + self.hi[x][subsets >> self.lo_bits]


def dp_max_concordant(h, max_k: int = DEFAULT_MAX_K, rtol: float = 0.0):
    """Maximum concordance over all orderings of the categories of ``h``.

    Returns ``(best, order, count)`` where ``order`` lists category indices from
    lowest to highest rank and is the lexicographically smallest optimal
    ordering, and ``count`` is the number of optimal orderings.  ``h`` may hold
    integer counts or (for population values) probabilities; ``rtol`` sets the
    tolerance for treating float candidates as tied.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InputError("H must be a square matrix")
    k = h.shape[0]
    if k > max_k:
        raise BudgetExceeded(
            f"k={k} categories exceeds the subset-DP limit of {max_k}; "
            f"memory grows as 2^k (raise max_k only with enough RAM)"
        )
    h = h.astype(np.int64) if np.issubdtype(h.dtype, np.integer) else h.astype(float)
    h = h.copy()
    np.fill_diagonal(h, 0)
    if k == 1:
        return h.dtype.type(0), [0], 1
    tol = rtol * float(np.abs(h).sum())
    weights = _SubsetWeights(h)
    size = 1 << k
    allsets = np.arange(size, dtype=np.int64)
    pc = _popcount(allsets)
    order = np.argsort(pc, kind="stable")
    bounds = np.concatenate(([0], np.cumsum(np.bincount(pc, minlength=k + 1))))
    layers = [order[bounds[p]:bounds[p + 1]] for p in range(k + 1)]

    dp = np.zeros(size, dtype=h.dtype)
    count = np.zeros(size, dtype=float)
    count[0] = 1.0
    for p in range(1, k + 1):
        sets = layers[p]
        best = np.full(sets.size, -np.inf if h.dtype.kind == "f" else np.iinfo(np.int64).min, dtype=h.dtype)
        cnt = np.zeros(sets.size)
        for x in range(k):
            idx = np.nonzero((sets >> x) & 1)[0]
            prev = sets[idx] ^ (1 << x)
            cand = dp[prev] + weights(prev, x)
            cur = best[idx]
            gt = cand > cur + tol
            eq = ~gt & (np.abs(cand - cur) <= tol)
            best[idx] = np.where(gt, cand, cur)
            cnt[idx] = np.where(gt, count[prev], np.where(eq, cnt[idx] + count[prev], cnt[idx]))
        dp[sets] = best
        count[sets] = cnt

    # mark subsets that lie on some optimal chain to the full set
    full = size - 1
    good = np.zeros(size, dtype=bool)
    good[full] = True
    for p in range(k, 0, -1):
        sets = layers[p]
        sets = sets[good[sets]]
        for x in range(k):
            s_x = sets[((sets >> x) & 1).astype(bool)]
            prev = s_x ^ (1 << x)
            tight = np.abs(dp[s_x] - (dp[prev] + weights(prev, x))) <= tol
            good[prev[tight]] = True

    chosen: list[int] = []
    cur_set = 0
    for _ in range(k):
        for x in range(k):
            if cur_set >> x & 1:
                continue
            nxt = cur_set | (1 << x)
            step = dp[cur_set] + weights(np.int64(cur_set), x)
            if good[nxt] and abs(dp[nxt] - step) <= tol:
                chosen.append(x)
                cur_set = nxt
                break
        else:  # pragma: no cover - guarded by construction of `good`
            raise RuntimeError("DP reconstruction failed")
    return dp[full], chosen, int(round(count[full]))


def _case1(s: PairedSample, max_k: int) -> GammaStarResult:
    h = build_h_matrix(s)
    total = int(h.sum())
    if total == 0:
        raise DegenerateSampleError("gamma undefined: all pairs tied")
    best, order, count = dp_max_concordant(h, max_k=max_k)
    best = int(best)
    return GammaStarResult(
        value=(2 * best - total) / total,
        argmax=Numbering.from_orders(order),
        argmax_count=count,
        concordant=best,
        untied=total,
        labels_x=s.x_labels,
    )


# --- case 2: two nominal variables ------------------------------------------------


def orderings(k: int) -> np.ndarray:
    """All orderings of ``k`` categories in lexicographic order, one per row."""
    return np.array(list(itertools.permutations(range(k))), dtype=np.intp).reshape(-1, k)


def _before_indicator(orders: np.ndarray) -> np.ndarray:
    """Row q, column (a, b): 1 if category a is ranked below b in ordering q."""
    m, k = orders.shape
    ranks = np.empty_like(orders)
    ranks[np.arange(m)[:, None], orders] = np.arange(k)
    return (ranks[:, :, None] < ranks[:, None, :]).reshape(m, k * k)


def _check_budget(k: int, l: int, max_categories: int) -> None:  # noqa: E741
    if k > max_categories or l > max_categories:
        raise BudgetExceeded(
            f"a {k}x{l} table needs {math.factorial(k) * math.factorial(l):,} numberings; "
            f"the limit is {max_categories} categories per variable"
        )


def untied_pairs(cells: np.ndarray) -> float:
    """Pairs (or pair probability mass) untied in both coordinates."""
    cells = np.asarray(cells, dtype=float)
    n = cells.sum()
    return 0.5 * (n * n - (cells.sum(1) ** 2).sum() - (cells.sum(0) ** 2).sum() + (cells ** 2).sum())


def _pair_products(cells: np.ndarray) -> np.ndarray:
    k, l = cells.shape  # noqa: E741
    return np.einsum("ac,bd->abcd", cells, cells).reshape(k * k, l * l)


def _matmul_dtype(cells: np.ndarray, integral: bool):
    if not integral:
        return float
    total = float(cells.sum())
    if total * total / 2 < _EXACT_FLOAT:
        return float
    if total * total / 2 < np.iinfo(np.int64).max:
        return np.int64
    raise InputError("table total too large for exact pair counting")


def concordance_matrix(cells, max_categories: int = DEFAULT_MAX_CATEGORIES):
    """Concordant-pair mass for every (x-ordering, y-ordering) combination.

    Returns ``(orders_x, orders_y, C)`` with ``C[i, j]`` the concordance under
    ``orders_x[i]`` and ``orders_y[j]``.  Memory is ``k! * l!``; meant for the
    small tables the joint covariance needs.
    """
    cells = np.asarray(cells)
    k, l = cells.shape  # noqa: E741
    _check_budget(k, l, max_categories)
    integral = bool(np.all(cells == np.round(cells)))
    dtype = _matmul_dtype(cells, integral)
    ox, oy = orderings(k), orderings(l)
    u = _before_indicator(ox).astype(dtype)
    v = _before_indicator(oy).astype(dtype)
    r = _pair_products(cells.astype(dtype))
    c = (u @ r) @ v.T
    if integral:
        c = np.rint(c).astype(np.int64) if dtype is float else c
    return ox, oy, c


def _scan_case2(cells: np.ndarray, max_categories: int, rtol: float = 0.0,
                block_elems: int = 1 << 22):
    """Streaming maximum over all orderings without materialising ``k! * l!``."""
    k, l = cells.shape  # noqa: E741
    _check_budget(k, l, max_categories)
    integral = bool(np.all(cells == np.round(cells)))
    dtype = _matmul_dtype(cells, integral)
    ox, oy = orderings(k), orderings(l)
    ur = _before_indicator(ox).astype(dtype) @ _pair_products(cells.astype(dtype))
    vt = _before_indicator(oy).astype(dtype).T.copy()
    rows_per_block = max(1, block_elems // vt.shape[1])
    best, best_ij, count = None, (0, 0), 0
    scale = float(cells.sum()) ** 2
    tol = rtol * scale
    for start in range(0, ur.shape[0], rows_per_block):
        block = ur[start:start + rows_per_block] @ vt
        if integral and dtype is float:
            block = np.rint(block)
        bmax = block.max()
        if best is None or bmax > best + tol:
            best = bmax
            flat = int(np.argmax(block >= bmax - tol))
            best_ij = (start + flat // block.shape[1], flat % block.shape[1])
            count = int(np.count_nonzero(block >= bmax - tol))
        elif abs(bmax - best) <= tol:
            count += int(np.count_nonzero(block >= best - tol))
    return ox[best_ij[0]], oy[best_ij[1]], best, count


def gamma_star_table(t: ContingencyTable,
                     max_categories: int = DEFAULT_MAX_CATEGORIES) -> GammaStarResult:
    """Estimator for two nominal variables given their counts table."""
    if t.mode != TableMode.COUNTS:
        raise InputError("gamma_star_table needs counts; use population_gamma_star for probabilities")
    cells = t.counts()
    total = untied_pairs(cells)
    if total <= 0:
        raise DegenerateSampleError("gamma undefined: all pairs tied")
    order_x, order_y, best, count = _scan_case2(cells, max_categories)
    best = int(best)
    total = int(round(total))
    return GammaStarResult(
        value=(2 * best - total) / total,
        argmax=Numbering.from_orders(order_x, order_y),
        argmax_count=count,
        concordant=best,
        untied=total,
        labels_x=t.rows,
        labels_y=t.cols,
    )


def gamma_star_estimate(s: PairedSample, max_k: int = DEFAULT_MAX_K,
                        max_categories: int = DEFAULT_MAX_CATEGORIES) -> GammaStarResult:
    """Maximum of the sample gamma over all numberings of the nominal variable(s)."""
    if s.kind == SampleKind.NOMINAL_REAL:
        return _case1(s, max_k)
    return gamma_star_table(table_from_sample(s), max_categories)


# --- population values ---------------------------------------------------------------


def population_gamma_star(t: ContingencyTable,
                          max_categories: int = DEFAULT_MAX_CATEGORIES) -> GammaStarResult:
    """gamma* of a probability table (counts tables are normalised first)."""
    p = t.probabilities()
    untied = untied_pairs(p)
    # untied here is half of 1 - nu; concordance below is likewise over unordered pairs
    if untied <= 1e-15:
        raise DegenerateSampleError("gamma undefined: nu = 1 (one row or one column)")
    order_x, order_y, best, count = _scan_case2(p, max_categories, rtol=1e-12)
    value = (2 * best - untied) / untied
    return GammaStarResult(
        value=float(value),
        argmax=Numbering.from_orders(order_x, order_y),
        argmax_count=count,
        concordant=float(2 * best),
        untied=float(2 * untied),
        labels_x=t.rows,
        labels_y=t.cols,
    )


def population_gamma_star_case1(pair_mass) -> GammaStarResult:
    """gamma* for one nominal and one continuous variable.

    ``pair_mass[c, c']`` is the probability that two independent draws fall in
    categories ``c`` and ``c'`` with the first real value strictly smaller.
    """
    j = np.asarray(pair_mass, dtype=float)
    untied = float(j.sum() - np.trace(j))
    if untied <= 0:
        raise DegenerateSampleError("gamma undefined: nu = 1")
    best, order, count = dp_max_concordant(j, rtol=1e-12)
    return GammaStarResult(
        value=float((2 * best - untied) / untied),
        argmax=Numbering.from_orders(order),
        argmax_count=count,
        concordant=float(best),
        untied=untied,
        labels_x=tuple(f"c{i + 1}" for i in range(j.shape[0])),
    )
