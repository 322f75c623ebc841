"""Reference tables used in tests, docs and the CLI demo."""

from __future__ import annotations

import numpy as np

from .core import ContingencyTable, TableMode

# Christians / Jews / Muslims in Germany, Poland and Czechia (2020 counts).
RELIGION_COUNTS = ContingencyTable(
    ("Germany", "Poland", "Czechia"),
    ("Christians", "Jews", "Muslims"),
    np.array([
        [56_071_000, 127_000, 5_351_000],
        [36_782_000, 3_100, 39_200],
        [3_684_000, 3_700, 13_400],
    ]),
    TableMode.COUNTS,
)

# Perfect dependence without a one-non-zero-entry-per-row structure.
PERFECT_NOT_MSC = ContingencyTable(
    ("x1", "x2", "x3"), ("y1", "y2", "y3"),
    np.array([[0.4, 0.2, 0.1], [0.2, 0.0, 0.0], [0.1, 0.0, 0.0]]),
    TableMode.PROBABILITIES,
)

# Same marginals, diagonal coupling.
PERFECT_DIAGONAL = ContingencyTable(
    ("x1", "x2", "x3"), ("y1", "y2", "y3"),
    np.diag([0.7, 0.2, 0.1]),
    TableMode.PROBABILITIES,
)

# Dependent table on which the symmetric lambda is exactly zero.
LAMBDA_ZERO_DEPENDENT = ContingencyTable(
    ("A", "B", "C"), ("1", "2", "3"),
    np.array([[0.30, 0.12, 0.08], [0.12, 0.11, 0.07], [0.08, 0.07, 0.05]]),
    TableMode.PROBABILITIES,
)

# Two 3x2 couplings that cannot be split into co- or countermonotonic binary
# indicator pairs, yet each is perfectly dependent once the rows are ordered.
BINARY_DECOMPOSITION_FAILURES = (
    ContingencyTable(("A", "B", "C"), ("a", "b"),
                     np.array([[4, 0], [0, 5], [3, 3]]) / 15, TableMode.PROBABILITIES),
    ContingencyTable(("A", "B", "C"), ("a", "b"),
                     np.array([[0, 4], [5, 0], [2, 4]]) / 15, TableMode.PROBABILITIES),
)

# Marginals for which no table has a single non-zero entry per row and column.
UNMATCHABLE_MARGINALS = (np.array([0.1, 0.7, 0.2]), np.array([0.3, 0.6, 0.1]))
