"""Monte Carlo harness: data generating processes, calibration of the
dependence parameter, and coverage / bias / size / power studies.

Every replication draws from its own Philox stream keyed by
``(seed, row, replication)``, so results do not depend on worker count or
execution order.
"""

from __future__ import annotations

import configparser
import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

from .core import (
    ContingencyTable,
    DegenerateSampleError,
    InputError,
    NomcorError,
    PairedSample,
    TableMode,
)
from .distributions import MvnConfig, cauchy_cdf, cauchy_quantile, normal_cdf, normal_quantile
from .gamma_star import (
    build_h_matrix,
    gamma_star_estimate,
    population_gamma_star,
    population_gamma_star_case1,
)
from .inference import (
    chi2_test_baseline,
    confidence_interval,
    f_test_baseline,
    independence_test,
    kernel_estimates,
    sigma_gamma_hat,
)

LABELS = ("A", "B", "C")
QUAD_POINTS = 200_000
CALIBRATION_TOL = 1e-3
HIST_BINS = 10


class Family(str, enum.Enum):
    REGRESSION_NORMAL = "regression-normal"
    REGRESSION_CAUCHY = "regression-cauchy"
    MLOGIT_NORMAL = "mlogit-normal"
    MLOGIT_CAUCHY = "mlogit-cauchy"
    TABLE_SKEW_UNIFORM = "table-skew-uniform"
    TABLE_UNIFORM_UNIFORM = "table-uniform-uniform"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @property
    def is_table(self) -> bool:
        return self in (Family.TABLE_SKEW_UNIFORM, Family.TABLE_UNIFORM_UNIFORM)

    @property
    def is_cauchy(self) -> bool:
        return self in (Family.REGRESSION_CAUCHY, Family.MLOGIT_CAUCHY)

    @classmethod
    def parse(cls, name: str) -> "Family":
        key = name.strip()
        for fam, short in _SHORT.items():
            if key.lower() in (fam.value, short.lower()):
                return fam
        raise InputError(f"unknown DGP family {name!r}")


_SHORT = {
    Family.REGRESSION_NORMAL: "RN",
    Family.REGRESSION_CAUCHY: "RC",
    Family.MLOGIT_NORMAL: "MLN",
    Family.MLOGIT_CAUCHY: "MLC",
    Family.TABLE_SKEW_UNIFORM: "SU",
    Family.TABLE_UNIFORM_UNIFORM: "UU",
}

# Cell probabilities are base + alpha * slope.
_TABLE_BASE = {
    Family.TABLE_SKEW_UNIFORM: np.array([[76 / 300, 4 / 100, 4 / 100]] * 3),
    Family.TABLE_UNIFORM_UNIFORM: np.full((3, 3), 1 / 9),
}
_TABLE_SLOPE = np.array([[2, -1, -1], [2, -1, -1], [-4, 2, 2]]) / 30


def alpha_range(family: Family) -> tuple[float, float]:
    """Values of alpha for which every cell probability is nonnegative."""
    family = Family(family)
    if not family.is_table:
        return -math.inf, math.inf
    base, slope = _TABLE_BASE[family], _TABLE_SLOPE
    bounds = -base / slope
    return float(bounds[slope > 0].max()), float(bounds[slope < 0].min())


def table_probabilities(family: Family, alpha: float) -> np.ndarray:
    family = Family(family)
    lo, hi = alpha_range(family)
    if not (lo - 1e-12 <= alpha <= hi + 1e-12):
        raise InputError(f"alpha={alpha} outside [{lo:.6g}, {hi:.6g}] for {family.value}")
    return np.clip(_TABLE_BASE[family] + alpha * _TABLE_SLOPE, 0.0, None)


def mlogit_probabilities(alpha: float, x) -> np.ndarray:
    """Rows of ``(P(A), P(B), P(C))`` given the real covariate."""
    x = np.asarray(x, dtype=float)
    logits = np.stack([-alpha * x, alpha * x, np.zeros_like(x)], axis=-1)
    return special.softmax(logits, axis=-1)


@dataclass(frozen=True)
class DgpSpec:
    family: Family
    alpha: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 2:
            raise InputError("sample size must be at least 2")
        if not math.isfinite(self.alpha):
            raise InputError("alpha must be finite")
        if self.family.is_table:
            table_probabilities(self.family, self.alpha)


def _stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def _noise(rng: np.random.Generator, size: int, cauchy: bool) -> np.ndarray:
    if cauchy:
        return cauchy_quantile(rng.random(size))
    return rng.standard_normal(size)


def generate(spec: DgpSpec, rng: np.random.Generator | int) -> PairedSample:
    """Draw ``spec.n`` iid pairs.  The nominal variable is always ``x``."""
    if not isinstance(rng, np.random.Generator):
        rng = _stream(int(rng))
    fam, n, a = spec.family, spec.n, spec.alpha
    if fam in (Family.REGRESSION_NORMAL, Family.REGRESSION_CAUCHY):
        codes = rng.integers(0, 3, size=n)
        shift = np.array([0.0, a, -a])[codes]
        y = shift + _noise(rng, n, fam.is_cauchy)
        return PairedSample.nominal_real(np.array(LABELS)[codes], y)
    if fam in (Family.MLOGIT_NORMAL, Family.MLOGIT_CAUCHY):
        real = _noise(rng, n, fam.is_cauchy)
        cum = np.cumsum(mlogit_probabilities(a, real), axis=1)
        u = rng.random(n)[:, None]
        codes = np.minimum((u > cum).sum(axis=1), 2)
        return PairedSample.nominal_real(np.array(LABELS)[codes], real)
    probs = table_probabilities(fam, a).ravel()
    counts = rng.multinomial(n, probs / probs.sum())
    cells = np.repeat(np.arange(9), counts)
    rows = np.array(["x1", "x2", "x3"])[cells // 3]
    cols = np.array(["y1", "y2", "y3"])[cells % 3]
    return PairedSample.nominal_nominal(rows, cols)


# --- population values --------------------------------------------------------------


def pair_mass(family: Family, alpha: float, points: int = QUAD_POINTS) -> np.ndarray:
    """``J[c, c'] = P(x_i = c, x_j = c', y_i < y_j)`` for two independent draws."""
    family = Family(family)
    if family.is_table:
        raise InputError("pair mass is defined for the continuous families only")
    if family in (Family.REGRESSION_NORMAL, Family.REGRESSION_CAUCHY):
        mu = np.array([0.0, alpha, -alpha])
        delta = mu[None, :] - mu[:, None]
        if family is Family.REGRESSION_NORMAL:
            p = normal_cdf(delta / math.sqrt(2.0))
        else:
            # difference of two standard Cauchy variates is Cauchy with scale 2
            p = cauchy_cdf(delta / 2.0)
        j = p / 9.0
    else:
        u = (np.arange(points) + 0.5) / points
        x = normal_quantile(u) if family is Family.MLOGIT_NORMAL else cauchy_quantile(u)
        w = mlogit_probabilities(alpha, x) / points
        above = np.cumsum(w[::-1], axis=0)[::-1] - 0.5 * w
        j = w.T @ above
    np.fill_diagonal(j, 0.0)
    return j


def true_gamma_star(spec: DgpSpec | Family, alpha: float | None = None) -> float:
    if isinstance(spec, DgpSpec):
        family, alpha = spec.family, spec.alpha
    else:
        family = Family(spec)
    if alpha == 0:
        return 0.0
    if family.is_table:
        t = ContingencyTable.from_array(table_probabilities(family, alpha), TableMode.PROBABILITIES)
        return float(population_gamma_star(t).value)
    return float(population_gamma_star_case1(pair_mass(family, alpha)).value)


def true_gamma_star_mc(spec: DgpSpec | Family, alpha: float | None = None, draws: int = 1_000_000,
                       seed: int = 0) -> float:
    """Monte Carlo oracle: gamma*-hat of one very large sample."""
    if isinstance(spec, DgpSpec):
        family, alpha = spec.family, spec.alpha
    else:
        family = Family(spec)
    s = generate(DgpSpec(family, alpha, draws), _stream(seed, 0, 0))
    if family.is_table:
        return float(gamma_star_estimate(s).value)
    h = build_h_matrix(s).astype(float)
    return float(population_gamma_star_case1(h / h.sum()).value)


def calibrate_alpha(family: Family, target: float, tol: float = CALIBRATION_TOL) -> float:
    """Smallest nonnegative alpha whose gamma* hits ``target`` (bisection)."""
    family = Family(family)
    if not (0.0 <= target < 1.0):
        raise InputError(f"target gamma* must lie in [0, 1), got {target}")
    if target == 0.0:
        return 0.0
    lo, hi = 0.0, alpha_range(family)[1]
    if math.isinf(hi):
        hi = 1.0
        while true_gamma_star(family, hi) < target:
            hi *= 2.0
            if hi > 1e4:
                raise InputError(f"gamma*={target} not reached by {family.value}")
    elif true_gamma_star(family, hi) < target - tol:
        raise InputError(
            f"gamma*={target} unattainable for {family.value}: the largest valid alpha "
            f"({hi:.6g}) gives {true_gamma_star(family, hi):.6g}")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        value = true_gamma_star(family, mid)
        if abs(value - target) <= tol / 20:
            return mid
        if value < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


# --- studies ------------------------------------------------------------------------


class StudyKind(str, enum.Enum):
    COVERAGE = "coverage"
    BIAS = "bias"
    SIZE = "size"
    POWER = "power"


def _default_level(kind: StudyKind) -> float:
    return 0.9 if kind is StudyKind.COVERAGE else 0.10


@dataclass
class StudyRow:
    family: str
    n: int
    alpha: float
    true_gamma_star: float
    replications: int
    seed: int
    mean_estimate: float
    mean_bias: float
    coverage: float
    rejection_rate: float
    baseline_rejection_rate: float
    failures: int
    p_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    baseline_p_values: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))


@dataclass
class StudyResult:
    name: str
    kind: StudyKind
    level: float
    seed: int
    mvn_target: float
    rows: list[StudyRow]

    COLUMNS = ("study", "kind", "family", "n", "alpha", "true_gamma_star", "replications",
               "seed", "mean_estimate", "mean_bias", "coverage", "rejection_rate",
               "baseline_rejection_rate", "failures")

    def to_tsv(self) -> str:
        lines = ["\t".join(self.COLUMNS)]
        for r in self.rows:
            values = (self.name, self.kind.value, r.family, r.n, r.alpha, r.true_gamma_star,
                      r.replications, r.seed, r.mean_estimate, r.mean_bias, r.coverage,
                      r.rejection_rate, r.baseline_rejection_rate, r.failures)
            lines.append("\t".join(_fmt(v) for v in values))
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        bins = np.linspace(0.0, 1.0, HIST_BINS + 1)
        rows = []
        for i, r in enumerate(self.rows):
            entry = {k: v for k, v in asdict(r).items() if k not in ("p_values", "baseline_p_values")}
            entry["row"] = i
            entry["replication_seeds"] = f"SeedSequence([{r.seed}, {i}, rep]) for rep < {r.replications}"
            for key, values in (("p_histogram", r.p_values), ("baseline_p_histogram", r.baseline_p_values)):
                values = values[np.isfinite(values)]
                if values.size:
                    entry[key] = np.histogram(values, bins=bins)[0].tolist()
            rows.append(entry)
        return {
            "study": self.name,
            "kind": self.kind.value,
            "level": self.level,
            "seed": self.seed,
            "tolerances": {"mvn_target_error": self.mvn_target, "calibration_tol": CALIBRATION_TOL},
            "histogram_bins": bins.tolist(),
            "rows": rows,
        }


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return "NA" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def _replicate(kind: StudyKind, spec: DgpSpec, row: int, reps: Sequence[int], seed: int,
               level: float, mvn_target: float, truth: float) -> np.ndarray:
    """One output row per replication: estimate, covered, p, baseline p."""
    out = np.full((len(reps), 4), np.nan)
    for i, rep in enumerate(reps):
        s = generate(spec, _stream(seed, row, rep))
        try:
            if kind is StudyKind.BIAS:
                out[i, 0] = gamma_star_estimate(s).value
            elif kind is StudyKind.COVERAGE:
                rep_ci = confidence_interval(s, level)
                out[i, 0] = rep_ci.gamma_star
                out[i, 1] = float(rep_ci.ci[0] <= truth <= rep_ci.ci[1])
            else:
                report = independence_test(
                    s, mvn=MvnConfig(target_error=mvn_target, seed=rep))
                out[i, 0] = report.gamma_star
                out[i, 2] = report.p_value
                try:
                    out[i, 3] = (chi2_test_baseline(s) if spec.family.is_table
                                 else f_test_baseline(s))
                except InputError:
                    pass
        except (DegenerateSampleError, InputError):
            continue
    return out


def _chunks(total: int, parts: int) -> list[list[int]]:
    size = max(1, math.ceil(total / parts))
    return [list(range(i, min(i + size, total))) for i in range(0, total, size)]


def run_study(kind: StudyKind | str, grid: Sequence[DgpSpec], replications: int, seed: int, *,
              level: float | None = None, threads: int = 1, mvn_target: float = 1e-3,
              name: str = "") -> StudyResult:
    kind = StudyKind(kind)
    level = _default_level(kind) if level is None else float(level)
    if not (0.0 < level < 1.0):
        raise InputError(f"level must lie in (0, 1), got {level}")
    if replications < 1:
        raise InputError("need at least one replication")
    rows = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for row, spec in enumerate(grid):
            truth = true_gamma_star(spec)
            args = (kind, spec, row)
            tail = (seed, level, mvn_target, truth)
            if pool is None:
                res = _replicate(*args, range(replications), *tail)
            else:
                futures = [pool.submit(_replicate, *args, reps, *tail)
                           for reps in _chunks(replications, 4 * threads)]
                res = np.vstack([f.result() for f in futures])
            rows.append(_summarise(spec, truth, replications, seed, level, kind, res))
    finally:
        if pool is not None:
            pool.shutdown()
    return StudyResult(name or kind.value, kind, level, seed, mvn_target, rows)


def _mean(values: np.ndarray) -> float:
    values = values[np.isfinite(values)]
    return float(values.mean()) if values.size else math.nan


def _summarise(spec, truth, replications, seed, level, kind, res) -> StudyRow:
    est, covered, p, pb = res.T
    failures = int(np.count_nonzero(~np.isfinite(est)))
    alpha_test = level
    reject = _mean((p <= alpha_test).astype(float)[np.isfinite(p)]) if np.isfinite(p).any() else math.nan
    reject_b = _mean((pb <= alpha_test).astype(float)[np.isfinite(pb)]) if np.isfinite(pb).any() else math.nan
    mean_est = _mean(est)
    return StudyRow(
        family=spec.family.value, n=spec.n, alpha=float(spec.alpha), true_gamma_star=truth,
        replications=replications, seed=seed, mean_estimate=mean_est,
        mean_bias=mean_est - truth, coverage=_mean(covered) if kind is StudyKind.COVERAGE else math.nan,
        rejection_rate=reject, baseline_rejection_rate=reject_b, failures=failures,
        p_values=p, baseline_p_values=pb,
    )


def variance_check(spec: DgpSpec, replications: int, seed: int) -> tuple[float, float]:
    """Empirical variance of sqrt(n)(gamma_hat - gamma) against the mean plug-in
    variance, both at the population maximising numbering."""
    if spec.family.is_table:
        raise InputError("variance check is implemented for the continuous families")
    numbering = population_gamma_star_case1(pair_mass(spec.family, spec.alpha)).argmax
    truth = true_gamma_star(spec)
    dev, var = np.empty(replications), np.empty(replications)
    for rep in range(replications):
        s = generate(spec, _stream(seed, 0, rep))
        est = kernel_estimates(s, numbering)
        dev[rep] = math.sqrt(spec.n) * (est.gamma_hat - truth)
        var[rep] = sigma_gamma_hat(s, numbering) ** 2
    return float(dev.var(ddof=1)), float(var.mean())


# --- config files ---------------------------------------------------------------------


@dataclass
class StudyConfig:
    name: str
    kind: StudyKind
    families: list[Family]
    sizes: list[int]
    alphas: list[float] | None
    targets: list[float] | None
    replications: int
    seed: int
    level: float
    mvn_target: float

    def grid(self) -> list[DgpSpec]:
        specs = []
        for fam in self.families:
            alphas = self.alphas if self.alphas is not None else [
                calibrate_alpha(fam, t) for t in self.targets]
            for n in self.sizes:
                specs.extend(DgpSpec(fam, a, n) for a in alphas)
        return specs


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def load_config(path: str | Path) -> list[StudyConfig]:
    """Parse an INI file with one section per study."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file {path} not found")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise InputError(f"cannot parse {path}: {exc}") from exc
    studies = []
    for name in parser.sections():
        sec = parser[name]
        try:
            kind = StudyKind(sec.get("kind", name).strip())
            has_alpha, has_target = "alpha" in sec, "gamma_star" in sec
            if has_alpha == has_target:
                raise InputError(f"[{name}] needs exactly one of 'alpha' or 'gamma_star'")
            studies.append(StudyConfig(
                name=name,
                kind=kind,
                families=[Family.parse(f) for f in sec["families"].replace(",", " ").split()],
                sizes=[int(v) for v in _floats(sec["n"])],
                alphas=_floats(sec["alpha"]) if has_alpha else None,
                targets=_floats(sec["gamma_star"]) if has_target else None,
                replications=sec.getint("replications", 1000),
                seed=sec.getint("seed", 0),
                level=sec.getfloat("level", _default_level(kind)),
                mvn_target=sec.getfloat("mvn_target", 1e-3),
            ))
        except (KeyError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"[{name}] invalid entry: {exc}") from exc
    if not studies:
        raise InputError(f"{path} defines no studies")
    return studies


def run_config(path: str | Path, out_dir: str | Path, *, seed: int | None = None,
               threads: int = 1) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cfg in load_config(path):
        result = run_study(cfg.kind, cfg.grid(), cfg.replications,
                           cfg.seed if seed is None else seed, level=cfg.level,
                           threads=threads, mvn_target=cfg.mvn_target, name=cfg.name)
        tsv = out_dir / f"{cfg.name}.tsv"
        tsv.write_text(result.to_tsv(), encoding="utf-8")
        side = out_dir / f"{cfg.name}.json"
        side.write_text(json.dumps(result.sidecar(), indent=2, default=_json_default) + "\n",
                        encoding="utf-8")
        written += [tsv, side]
    return written


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.value
    raise TypeError(f"not serialisable: {type(obj).__name__}")


__all__ = [
    "DgpSpec", "Family", "NomcorError", "StudyKind", "StudyResult", "StudyRow",
    "alpha_range", "calibrate_alpha", "generate", "load_config", "pair_mass",
    "run_config", "run_study", "table_probabilities", "true_gamma_star",
    "true_gamma_star_mc", "variance_check",
]
