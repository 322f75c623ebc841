"""Command line interface: ``nomcor measure | infer | simulate``.

Exit codes: 0 success, 2 usage or parse error, 3 budget exceeded,
4 numerically degenerate input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classical import classical_report
from .core import (
    BudgetExceeded,
    DegenerateSampleError,
    InputError,
    PairedSample,
    SampleKind,
    TableMode,
    sample_from_csv,
    table_from_csv,
    table_from_sample,
)
from .distributions import MvnConfig
from .gamma_star import (
    DEFAULT_MAX_CATEGORIES,
    DEFAULT_MAX_K,
    gamma_star_estimate,
    gamma_star_table,
    population_gamma_star,
)
from .inference import JOINT_MAX_CATEGORIES, JOINT_MAX_K, confidence_interval, independence_test
from .simulation import run_config

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_DEGENERATE = 0, 2, 3, 4
SEED_ENV = "NOMCOR_SEED"
MAX_EXPANDED_SAMPLE = 5_000_000


def _level(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError(f"level must lie in (0, 1), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file")
    shape = p.add_mutually_exclusive_group(required=True)
    shape.add_argument("--table", action="store_true",
                       help="input is a contingency table (first column: row labels)")
    shape.add_argument("--sample", action="store_true", help="input has one row per observation")
    p.add_argument("--x-column", default="0", help="sample column of the nominal variable")
    p.add_argument("--y-column", default="1", help="sample column of the second variable")
    p.add_argument("--format", choices=("json", "text"), default="json")


def _add_budgets(p: argparse.ArgumentParser, max_k: int, max_cat: int) -> None:
    p.add_argument("--max-k", type=_positive_int, default=max_k,
                   help=f"category limit with a real-valued y (default {max_k})")
    p.add_argument("--max-categories", type=_positive_int, default=max_cat,
                   help=f"per-variable limit for two nominal variables (default {max_cat})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nomcor", description="Association for nominal variables")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="gamma* estimate and classical measures")
    _add_input(m)
    _add_budgets(m, DEFAULT_MAX_K, DEFAULT_MAX_CATEGORIES)
    m.add_argument("--all-classical", action="store_true",
                   help="also report V, T, C, S, lambda, tau and U")

    i = sub.add_parser("infer", help="confidence interval and independence test")
    _add_input(i)
    _add_budgets(i, JOINT_MAX_K, JOINT_MAX_CATEGORIES)
    i.add_argument("--level", type=_level, default=0.9)
    i.add_argument("--test", action="store_true", help="run the independence test")
    i.add_argument("--seed", type=int, default=None, help=f"MVN seed (fallback ${SEED_ENV}, then 0)")
    i.add_argument("--mvn-target", type=float, default=1e-4)

    s = sub.add_parser("simulate", help="run the Monte Carlo studies in a config file")
    s.add_argument("config", help="INI file, one section per study")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--seed", type=int, default=None, help=f"override study seeds (fallback ${SEED_ENV})")
    s.add_argument("--threads", type=_positive_int, default=1)
    return parser


def _seed(arg: int | None, default: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return default
    try:
        return int(env)
    except ValueError:
        raise InputError(f"${SEED_ENV} is not an integer: {env!r}") from None


def _digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(argv, seed, budgets, started, digest) -> dict:
    return {
        "command": ["nomcor", *argv],
        "input_sha256": digest,
        "seed": seed,
        "version": __version__,
        "budgets": budgets,
        "timing_seconds": time.perf_counter() - started,
    }


def _load(args):
    path = Path(args.input)
    if not path.is_file():
        raise InputError(f"input file {path} not found")
    if args.table:
        return table_from_csv(path)
    cols = [int(c) if c.lstrip("-").isdigit() else c for c in (args.x_column, args.y_column)]
    return sample_from_csv(path, cols[0], cols[1])


def _as_sample(data) -> PairedSample:
    if isinstance(data, PairedSample):
        return data
    if data.mode != TableMode.COUNTS:
        raise InputError("inference needs a table of counts, not probabilities")
    if data.total > MAX_EXPANDED_SAMPLE:
        raise BudgetExceeded(f"table total {data.total:,} exceeds {MAX_EXPANDED_SAMPLE:,} observations")
    return data.to_sample()


def _estimate(data, args):
    if isinstance(data, PairedSample):
        return gamma_star_estimate(data, max_k=args.max_k, max_categories=args.max_categories)
    if data.mode != TableMode.COUNTS:
        return population_gamma_star(data, max_categories=args.max_categories)
    return gamma_star_table(data, max_categories=args.max_categories)


def _numbering_dict(numbering) -> dict:
    return {"x": list(numbering.perm_x),
            "y": None if numbering.perm_y is None else list(numbering.perm_y)}


def cmd_measure(args) -> dict:
    data = _load(args)
    est = _estimate(data, args)
    out = {"gamma_star": {
        "value": est.value,
        "argmax": _numbering_dict(est.argmax),
        "argmax_count": est.argmax_count,
        "ordered_labels": est.ordered_labels(),
    }}
    if args.all_classical:
        if isinstance(data, PairedSample):
            if data.kind != SampleKind.NOMINAL_NOMINAL:
                raise InputError("classical measures need two nominal variables")
            data = table_from_sample(data)
        out["classical"] = classical_report(data).as_dict()
    return out


def cmd_infer(args, seed: int) -> dict:
    s = _as_sample(_load(args))
    if args.test:
        report = independence_test(s, args.level, mvn=MvnConfig(target_error=args.mvn_target, seed=seed),
                                   max_k=args.max_k, max_categories=args.max_categories)
    else:
        report = confidence_interval(s, args.level)
    return report.as_dict()


def _text(obj, prefix: str = "") -> list[str]:
    lines = []
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            lines += _text(value, name + ".")
        elif isinstance(value, float):
            lines.append(f"{name}\t{value:.6g}")
        else:
            lines.append(f"{name}\t{value}")
    return lines


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "text":
        print("\n".join(_text({k: v for k, v in payload.items() if k != "manifest"})))
        print(f"manifest\t{json.dumps(payload['manifest'])}")
    else:
        print(json.dumps(payload, indent=2, default=_json_default))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        if args.command == "measure":
            payload = cmd_measure(args)
            budgets = {"max_k": args.max_k, "max_categories": args.max_categories}
            payload["manifest"] = _manifest(argv, None, budgets, started, _digest(args.input))
            _emit(payload, args.format)
        elif args.command == "infer":
            seed = _seed(args.seed, 0)
            payload = cmd_infer(args, seed)
            budgets = {"max_k": args.max_k, "max_categories": args.max_categories,
                       "mvn_target_error": args.mvn_target}
            payload["manifest"] = _manifest(argv, seed, budgets, started, _digest(args.input))
            _emit(payload, args.format)
        else:
            seed = _seed(args.seed, None)
            if not Path(args.config).is_file():
                raise InputError(f"config file {args.config} not found")
            written = run_config(args.config, args.out, seed=seed, threads=args.threads)
            manifest = _manifest(argv, seed, {"threads": args.threads}, started,
                                 _digest(args.config))
            manifest["outputs"] = [p.name for p in written]
            path = Path(args.out) / "manifest.json"
            path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
            for p in written:
                print(p)
    except BudgetExceeded as exc:
        print(f"nomcor: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DegenerateSampleError as exc:
        print(f"nomcor: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, OSError) as exc:
        print(f"nomcor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
