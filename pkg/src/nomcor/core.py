"""Domain types, ingestion and table bookkeeping shared by the other modules."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class NomcorError(Exception):
    """Base class for all errors raised by this package."""


class InputError(NomcorError, ValueError):
    """Malformed input (files, labels, shapes)."""


class BudgetExceeded(NomcorError):
    """A combinatorial search or integration would exceed the configured budget."""


class DegenerateSampleError(NomcorError, ValueError):
    """The statistic is undefined for the given sample (e.g. all pairs tied)."""


class SampleKind(str, enum.Enum):
    NOMINAL_NOMINAL = "nominal-nominal"
    NOMINAL_REAL = "nominal-real"


class TableMode(str, enum.Enum):
    COUNTS = "counts"
    PROBABILITIES = "probabilities"


PROB_TOL = 1e-12


def _check_label(label: str, where: str) -> str:
    if not isinstance(label, str):
        label = str(label)
    label = label.strip()
    if not label:
        raise InputError(f"empty label in {where}")
    return label


@dataclass(frozen=True)
class PairedSample:
    """n observations of a nominal ``x`` and a nominal or real ``y``.

    ``x`` is always a tuple of labels. ``y`` is a tuple of labels for
    ``nominal-nominal`` samples and a float array otherwise. Real ``y`` values
    are compared with exact equality when detecting ties.
    """

    x: tuple[str, ...]
    y: tuple[str, ...] | np.ndarray
    kind: SampleKind

    def __post_init__(self):
        n = len(self.x)
        if n != len(self.y):
            raise InputError(f"x has {n} entries but y has {len(self.y)}")
        if n < 2:
            raise InputError("a sample needs at least 2 observations")
        object.__setattr__(self, "x", tuple(_check_label(v, "x") for v in self.x))
        if self.kind == SampleKind.NOMINAL_NOMINAL:
            object.__setattr__(self, "y", tuple(_check_label(v, "y") for v in self.y))
        else:
            y = np.asarray(self.y, dtype=float)
            if not np.all(np.isfinite(y)):
                raise InputError("real y values must be finite")
            y = y.copy()
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @classmethod
    def nominal_real(cls, x: Sequence, y: Sequence[float]) -> "PairedSample":
        return cls(tuple(x), np.asarray(y, dtype=float), SampleKind.NOMINAL_REAL)

    @classmethod
    def nominal_nominal(cls, x: Sequence, y: Sequence) -> "PairedSample":
        return cls(tuple(x), tuple(y), SampleKind.NOMINAL_NOMINAL)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def x_labels(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.x)))

    @property
    def y_labels(self) -> tuple[str, ...]:
        if self.kind != SampleKind.NOMINAL_NOMINAL:
            raise InputError("y is real-valued and has no labels")
        return tuple(sorted(set(self.y)))

    @property
    def k(self) -> int:
        return len(set(self.x))

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.y_labels)

    def x_codes(self) -> np.ndarray:
        """Index of each observation's x label in the sorted label list."""
        index = {lab: i for i, lab in enumerate(self.x_labels)}
        return np.fromiter((index[v] for v in self.x), dtype=np.intp, count=self.n)

    def y_codes(self) -> np.ndarray:
        index = {lab: i for i, lab in enumerate(self.y_labels)}
        return np.fromiter((index[v] for v in self.y), dtype=np.intp, count=self.n)

    def swap(self) -> "PairedSample":
        """Exchange the roles of x and y (nominal-nominal only)."""
        if self.kind != SampleKind.NOMINAL_NOMINAL:
            raise InputError("only nominal-nominal samples can be swapped")
        return PairedSample(self.y, self.x, self.kind)


@dataclass(frozen=True)
class ContingencyTable:
    """A k x l table of counts or probabilities with labelled rows and columns.

    Rows and columns with zero mass are dropped on construction.
    """

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: np.ndarray
    mode: TableMode = TableMode.COUNTS

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2:
            raise InputError("table cells must form a matrix")
        if cells.shape != (len(self.rows), len(self.cols)):
            raise InputError(
                f"cells have shape {cells.shape} but there are "
                f"{len(self.rows)} row and {len(self.cols)} column labels"
            )
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise InputError("table cells must be finite and nonnegative")
        rows = tuple(_check_label(r, "row labels") for r in self.rows)
        cols = tuple(_check_label(c, "column labels") for c in self.cols)
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise InputError("duplicate row or column label")
        mode = TableMode(self.mode)
        if mode == TableMode.COUNTS:
            if np.any(cells != np.round(cells)):
                raise InputError("counts tables need integer cells")
        else:
            total = cells.sum()
            if abs(total - 1.0) > PROB_TOL * max(1, cells.size):
                raise InputError(f"probabilities sum to {total!r}, not 1")
        keep_r = cells.sum(axis=1) > 0
        keep_c = cells.sum(axis=0) > 0
        if not keep_r.any():
            raise InputError("table has no mass")
        cells = cells[np.ix_(keep_r, keep_c)]
        cells.setflags(write=False)
        object.__setattr__(self, "rows", tuple(r for r, keep in zip(rows, keep_r) if keep))
        object.__setattr__(self, "cols", tuple(c for c, keep in zip(cols, keep_c) if keep))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "mode", mode)

    @classmethod
    def from_array(cls, cells, mode: TableMode | str | None = None,
                   rows: Sequence[str] | None = None,
                   cols: Sequence[str] | None = None) -> "ContingencyTable":
        """Build a table with default labels ``r1.., c1..``.

        Without an explicit mode, integer-valued arrays are counts and
        everything else must be probabilities.
        """
        arr = np.atleast_2d(np.asarray(cells, dtype=float))
        if mode is None:
            mode = TableMode.COUNTS if np.all(arr == np.round(arr)) and arr.sum() > 1 else TableMode.PROBABILITIES
        rows = rows or [f"r{i + 1}" for i in range(arr.shape[0])]
        cols = cols or [f"c{j + 1}" for j in range(arr.shape[1])]
        return cls(tuple(rows), tuple(cols), arr, TableMode(mode))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    def counts(self) -> np.ndarray:
        if self.mode != TableMode.COUNTS:
            raise InputError("table is not in counts mode")
        return self.cells.astype(np.int64)

    def probabilities(self) -> np.ndarray:
        """Cell probabilities regardless of mode."""
        if self.mode == TableMode.PROBABILITIES:
            return np.asarray(self.cells)
        return self.cells / self.cells.sum()

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.cols, self.rows, self.cells.T, self.mode)

    def to_sample(self) -> PairedSample:
        """Expand a counts table into a nominal-nominal sample (row-major order)."""
        counts = self.counts()
        x, y = [], []
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.cols):
                x.extend([r] * int(counts[i, j]))
                y.extend([c] * int(counts[i, j]))
        return PairedSample.nominal_nominal(x, y)


@dataclass(frozen=True)
class Numbering:
    """Ranks assigned to the categories of x (and optionally y).

    ``perm_x[i]`` is the 1-based rank of the i-th label in lexicographic
    order; ``perm_y`` is ``None`` when y is real-valued.
    """

    perm_x: tuple[int, ...]
    perm_y: tuple[int, ...] | None = None

    def __post_init__(self):
        for perm in (self.perm_x, self.perm_y):
            if perm is not None and sorted(perm) != list(range(1, len(perm) + 1)):
                raise InputError(f"{perm} is not a permutation of 1..{len(perm)}")
        object.__setattr__(self, "perm_x", tuple(int(v) for v in self.perm_x))
        if self.perm_y is not None:
            object.__setattr__(self, "perm_y", tuple(int(v) for v in self.perm_y))

    @classmethod
    def from_orders(cls, order_x: Sequence[int], order_y: Sequence[int] | None = None) -> "Numbering":
        """Build from category index sequences listed from lowest to highest rank."""
        return cls(_order_to_ranks(order_x),
                   None if order_y is None else _order_to_ranks(order_y))

    @classmethod
    def identity(cls, k: int, l: int | None = None) -> "Numbering":
        return cls(tuple(range(1, k + 1)), None if l is None else tuple(range(1, l + 1)))

    def ranks_x(self) -> np.ndarray:
        return np.asarray(self.perm_x, dtype=np.intp) - 1

    def ranks_y(self) -> np.ndarray | None:
        return None if self.perm_y is None else np.asarray(self.perm_y, dtype=np.intp) - 1

    def order_x(self) -> list[int]:
        return list(np.argsort(self.perm_x))

    def order_y(self) -> list[int] | None:
        return None if self.perm_y is None else list(np.argsort(self.perm_y))

    def complement_x(self) -> "Numbering":
        k = len(self.perm_x)
        return Numbering(tuple(k - r + 1 for r in self.perm_x), self.perm_y)

    def complement_y(self) -> "Numbering":
        if self.perm_y is None:
            raise InputError("numbering has no y part")
        l = len(self.perm_y)  # noqa: E741
        return Numbering(self.perm_x, tuple(l - r + 1 for r in self.perm_y))


def _order_to_ranks(order: Sequence[int]) -> tuple[int, ...]:
    ranks = [0] * len(order)
    for rank, cat in enumerate(order):
        ranks[int(cat)] = rank + 1
    return tuple(ranks)


@dataclass(frozen=True)
class PairCounts:
    """Classification of all n(n-1)/2 unordered pairs."""

    concordant: int
    discordant: int
    ties_x_only: int
    ties_y_only: int
    ties_both: int
    total_pairs: int = field(default=-1)

    def __post_init__(self):
        parts = (self.concordant, self.discordant, self.ties_x_only,
                 self.ties_y_only, self.ties_both)
        if any(p < 0 for p in parts):
            raise InputError("pair counts must be nonnegative")
        total = sum(int(p) for p in parts)
        if self.total_pairs == -1:
            object.__setattr__(self, "total_pairs", total)
        elif self.total_pairs != total:
            raise InputError(f"pair counts sum to {total}, expected {self.total_pairs}")

    @property
    def untied(self) -> int:
        return self.concordant + self.discordant

    @property
    def tied(self) -> int:
        return self.ties_x_only + self.ties_y_only + self.ties_both


# --- ingestion -----------------------------------------------------------------


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def sample_from_csv(path: str | Path, x_column: str | int = 0,
                    y_column: str | int = 1) -> PairedSample:
    """Read a two-column CSV with a header row into a :class:`PairedSample`.

    ``y`` becomes real-valued when every entry parses as a finite number and
    nominal when none does; a mix is rejected with the offending row number
    (1-based, counting data rows only).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return sample_from_text(text, x_column, y_column)


def sample_from_text(text: str, x_column: str | int = 0,
                     y_column: str | int = 1) -> PairedSample:
    rows = [r for r in csv.reader(text.splitlines()) if any(cell.strip() for cell in r)]
    if not rows:
        raise InputError("empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise InputError("no data rows after the header")
    xi = _column_index(header, x_column)
    yi = _column_index(header, y_column)
    xs, ys = [], []
    for lineno, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise InputError(f"row {lineno} has {len(row)} fields, header has {len(header)}")
        xs.append(row[xi].strip())
        ys.append(row[yi].strip())
    parsed = [_parse_float(v) for v in ys]
    numeric = [p is not None for p in parsed]
    if all(numeric):
        return PairedSample.nominal_real(xs, parsed)
    if any(numeric):
        # report the first row that disagrees with the first row's type
        first = numeric[0]
        bad = next(i for i, flag in enumerate(numeric, start=1) if flag != first)
        raise InputError(f"column {header[yi]} mixes numeric and non-numeric at row {bad}")
    return PairedSample.nominal_nominal(xs, ys)


def _column_index(header: list[str], column: str | int) -> int:
    if isinstance(column, int):
        if not 0 <= column < len(header):
            raise InputError(f"column {column} out of range")
        return column
    try:
        return header.index(column)
    except ValueError:
        raise InputError(f"no column named {column!r}") from None


def table_from_csv(path: str | Path) -> ContingencyTable:
    """Read a counts (or probabilities) matrix; first column holds row labels."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(text.splitlines()) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise InputError("table needs a header row and at least one data row")
    cols = [c.strip() for c in rows[0][1:]]
    labels, cells = [], []
    for lineno, row in enumerate(rows[1:], start=1):
        if len(row) != len(cols) + 1:
            raise InputError(f"row {lineno} has {len(row)} fields, expected {len(cols) + 1}")
        labels.append(row[0].strip())
        values = []
        for cell in row[1:]:
            v = _parse_float(cell.strip().replace("_", ""))
            if v is None:
                raise InputError(f"non-numeric cell {cell!r} in row {lineno}")
            values.append(v)
        cells.append(values)
    arr = np.asarray(cells, dtype=float)
    mode = TableMode.COUNTS if np.all(arr == np.round(arr)) and abs(arr.sum() - 1) > PROB_TOL else TableMode.PROBABILITIES
    return ContingencyTable(tuple(labels), tuple(cols), arr, mode)


def table_to_csv(t: ContingencyTable) -> str:
    lines = ["," + ",".join(t.cols)]
    for r, row in zip(t.rows, t.cells):
        fmt = (lambda v: str(int(v))) if t.mode == TableMode.COUNTS else repr
        lines.append(r + "," + ",".join(fmt(float(v)) for v in row))
    return "\n".join(lines) + "\n"


# --- table construction ---------------------------------------------------------


def table_from_sample(s: PairedSample) -> ContingencyTable:
    """Joint counts with lexicographically sorted labels."""
    if s.kind != SampleKind.NOMINAL_NOMINAL:
        raise InputError("a contingency table needs a nominal-nominal sample")
    xc, yc = s.x_codes(), s.y_codes()
    k, l = s.k, s.l  # noqa: E741
    cells = np.bincount(xc * l + yc, minlength=k * l).reshape(k, l)
    return ContingencyTable(s.x_labels, s.y_labels, cells, TableMode.COUNTS)


def normalize(t: ContingencyTable) -> ContingencyTable:
    if t.mode == TableMode.PROBABILITIES:
        return t
    total = t.cells.sum()
    if total <= 0:
        raise InputError("cannot normalize a table with zero total")
    return ContingencyTable(t.rows, t.cols, t.cells / total, TableMode.PROBABILITIES)


def _check_marginal(p, name: str) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InputError(f"{name} must be a nonnegative probability vector")
    if abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
        raise InputError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def comonotonic_table(px, py, rows: Sequence[str] | None = None,
                      cols: Sequence[str] | None = None) -> ContingencyTable:
    """Upper Frechet-Hoeffding coupling of two discrete marginals.

    Mass is placed by walking both cumulative distributions in lockstep, so
    the result has row sums ``px`` and column sums ``py``.
    """
    px = _check_marginal(px, "px")
    py = _check_marginal(py, "py")
    fx, fy = np.cumsum(px), np.cumsum(py)
    fx[-1] = fy[-1] = 1.0
    cuts = np.unique(np.concatenate(([0.0], fx, fy)))
    cells = np.zeros((px.size, py.size))
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        i = min(int(np.searchsorted(fx, mid)), px.size - 1)
        j = min(int(np.searchsorted(fy, mid)), py.size - 1)
        cells[i, j] += hi - lo
    cells /= cells.sum()
    rows = rows or [f"x{i + 1}" for i in range(px.size)]
    cols = cols or [f"y{j + 1}" for j in range(py.size)]
    return ContingencyTable(tuple(rows), tuple(cols), cells, TableMode.PROBABILITIES)
