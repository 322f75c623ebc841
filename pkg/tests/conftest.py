import itertools

import numpy as np
import pytest

from nomcor.concordance import count_pairs_reference
from nomcor.core import PairedSample


def brute_force_real(s: PairedSample):
    """Best (C - D) / (C + D) over every ranking of the x categories."""
    codes = s.x_codes()
    best = None
    for perm in itertools.permutations(range(s.k)):
        pc = count_pairs_reference(np.asarray(perm)[codes], s.y)
        if pc.untied == 0:
            continue
        value = (pc.concordant - pc.discordant) / pc.untied
        if best is None or pc.concordant > best[0]:
            best = (pc.concordant, value)
    return best


def brute_force_nominal(s: PairedSample):
    xc, yc = s.x_codes(), s.y_codes()
    best = None
    for px in itertools.permutations(range(s.k)):
        rx = np.asarray(px)[xc]
        for py in itertools.permutations(range(s.l)):
            pc = count_pairs_reference(rx, np.asarray(py)[yc])
            if pc.untied == 0:
                continue
            if best is None or pc.concordant > best[0]:
                best = (pc.concordant, (pc.concordant - pc.discordant) / pc.untied)
    return best


def random_real_sample(rng, k_max=6, n_max=60, rounding=1):
    k = int(rng.integers(2, k_max + 1))
    n = int(rng.integers(max(k, 4), n_max + 1))
    labels = np.array([f"c{i}" for i in range(k)])
    x = labels[rng.integers(0, k, size=n)]
    y = np.round(rng.normal(size=n), rounding)
    return PairedSample.nominal_real(x, y)


def random_nominal_sample(rng, k_max=4, n_max=60):
    k = int(rng.integers(2, k_max + 1))
    l = int(rng.integers(2, k_max + 1))  # noqa: E741
    n = int(rng.integers(6, n_max + 1))
    x = np.array([f"a{i}" for i in range(k)])[rng.integers(0, k, size=n)]
    y = np.array([f"b{i}" for i in range(l)])[rng.integers(0, l, size=n)]
    return PairedSample.nominal_nominal(x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")
