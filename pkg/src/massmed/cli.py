"""Command-line entry point.

Subcommands: ``simulate``, ``ci-study``, ``test-study``, ``timing``, ``analyze``.

Options may also come from a flat ``key = value`` config file given with
``--config``. Keys are the long option names (``-`` or ``_`` both accepted),
``#`` starts a comment, and flags given on the command line win over the
file. The default seed is read from ``MASSMED_SEED`` when set.

Exit status: 0 on success, 2 for usage errors, and otherwise the
``exit_code`` of the error category (3 invalid argument, 4 data, 5
numerical, 6 engine).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import analyze
from .data_io import ColumnMapping, load_csv, write_csv
from .errors import DataError, InvalidArgumentError, MassmedError
from .report import (
    Table,
    ci_tables,
    json_line,
    render_csv,
    render_text,
    testing_tables,
    timing_tables,
)
from .simgen import generate, get_scenario
from .stochastics import RngStream
from .studies import run_ci_study, run_test_study, run_timing

__all__ = ["main", "build_parser", "load_config"]

SEED_ENV = "MASSMED_SEED"
STUDY_N = 10_000
TIMING_N = 100_000
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise InvalidArgumentError(f"{SEED_ENV} must be non-negative")
    return seed


def load_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file into a dict of raw strings."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
    p.add_argument("--config", help="flat key = value file supplying option defaults")
    p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, default=1, help="thread budget (default 1)")
    p.add_argument("--format", choices=("json", "table", "csv"), default="json")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.add_argument("--csv-dir", help="with --format csv, write one file per table here")
    if scenario:
        p.add_argument("--scenario", help="catalogue key, e.g. ci/linear/case1")
        p.add_argument("--n", type=int, help=f"sample size (default {STUDY_N}; {TIMING_N} for timing)")
        p.add_argument("--reading", choices=("variance", "sd"), default="variance",
                       help="how the nominal noise/covariate scales are read")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="massmed", description="Mediation analysis for large datasets.")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["simulate"] = sub.add_parser("simulate", help="generate one dataset to CSV")
    _common(p)
    p.add_argument("--mapping", help="also write the matching column mapping (JSON) here")

    p = subs["ci-study"] = sub.add_parser("ci-study", help="coverage/length study of SDB intervals")
    _common(p)
    p.add_argument("--replicates", type=int, default=500, help="bootstrap replicates S")
    p.add_argument("--reps", type=int, default=200, help="Monte Carlo repetitions")
    p.add_argument("--subset-exponent", type=float, default=0.7, help="b = floor(n^r)")
    p.add_argument("--level", type=float, default=0.95, help="confidence level 1 - delta")
    p.add_argument("--baseline-bootstrap", action="store_true", help="also run the full bootstrap")
    p.add_argument("--centering", choices=("subset", "full"), default="subset")
    p.add_argument("--records", action="store_true", help="emit per-repetition records (json)")

    p = subs["test-study"] = sub.add_parser("test-study", help="bias/MSE/Power/FWER of the DC Sobel test")
    _common(p)
    p.add_argument("--blocks", type=_int_list, default=[1, 5, 50], help="comma-separated J values")
    p.add_argument("--reps", type=int, default=200, help="Monte Carlo repetitions")
    p.add_argument("--level", type=float, default=0.95, help="1 - significance level")
    p.add_argument("--records", action="store_true", help="emit per-repetition records (json)")

    p = subs["timing"] = sub.add_parser("timing", help="wall-clock comparison of methods")
    _common(p)
    p.add_argument("--methods", type=_str_list, default=["sdb", "bootstrap"],
                   help="comma-separated: sdb, bootstrap, dc:J, dc-block:J")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--subset-exponent", type=float, default=0.7)
    p.add_argument("--level", type=float, default=0.95)

    p = subs["analyze"] = sub.add_parser("analyze", help="analyse a CSV file")
    _common(p, scenario=False)
    p.add_argument("--input", help="CSV file with a header row")
    p.add_argument("--mapping", help="JSON column mapping")
    p.add_argument("--outcome-kind", choices=("continuous", "binary"), help="override the mapping")
    p.add_argument("--method", choices=("sdb", "dc", "both"), default="both")
    p.add_argument("--subset-exponent", type=float, default=0.7)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--blocks", type=_int_list, default=[1])
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--baseline-bootstrap", action="store_true")
    p.add_argument("--centering", choices=("subset", "full"), default="subset")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    return parser, subs


def _apply_config(sub: argparse.ArgumentParser, cfg: dict) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    defaults = {}
    for key, raw in cfg.items():
        if key == "config" or key not in actions:
            raise InvalidArgumentError(f"unknown config key {key!r}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise InvalidArgumentError(f"config key {key!r} expects a boolean, got {raw!r}")
            defaults[key] = low in _TRUE
            continue
        try:
            val = act.type(raw) if act.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise InvalidArgumentError(f"config key {key!r}: {exc}") from None
        if act.choices and val not in act.choices:
            raise InvalidArgumentError(f"config key {key!r} must be one of {list(act.choices)}")
        defaults[key] = val
    sub.set_defaults(**defaults)


def _delta(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"--level must lie in (0, 1), got {level}")
    # round away the binary noise of 1 - 0.95
    return round(1.0 - level, 12)


def _emit(args, json_records: list[dict], tables: list[Table], out) -> None:
    if args.format == "json":
        for rec in json_records:
            out.write(json_line(rec) + "\n")
    elif args.format == "table":
        out.write("\n\n".join(render_text(t) for t in tables) + "\n")
    else:
        if args.csv_dir:
            folder = Path(args.csv_dir)
            folder.mkdir(parents=True, exist_ok=True)
            for t in tables:
                (folder / f"{t.name}.csv").write_text(render_csv(t), encoding="utf-8")
        else:
            out.write("\n".join(f"# {t.name}\n{render_csv(t)}" for t in tables))


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise InvalidArgumentError(f"--{name.replace('_', '-')} is required for {args.command}")


def _study_records(metrics, include_records: bool) -> list[dict]:
    recs = [{"record": "summary", **metrics.to_dict()}]
    if include_records:
        recs += [{"record": "repetition", "config": metrics.config, **r} for r in metrics.records]
    return recs


def _run(args, out) -> None:
    cmd = args.command
    if cmd == "analyze":
        _need(args, "input", "mapping")
        mapping = ColumnMapping.from_json(args.mapping)
        if args.outcome_kind:
            mapping = ColumnMapping(**{**mapping.to_dict(), "outcome_kind": args.outcome_kind})
        data = load_csv(args.input, mapping)
        rpt = analyze(data, method=args.method, subset_exponent=args.subset_exponent,
                      replicates=args.replicates, blocks=args.blocks, delta=_delta(args.level),
                      seed=args.seed, threads=args.threads, baseline=args.baseline_bootstrap,
                      centering=args.centering)
        _emit(args, rpt.to_records(include_timing=not args.no_timing), rpt.tables(), out)
        return

    _need(args, "scenario")
    n = args.n if args.n is not None else (TIMING_N if cmd == "timing" else STUDY_N)
    sc = get_scenario(args.scenario, n, args.reading)
    alpha, beta = sc.params.alpha, sc.params.beta
    if cmd == "simulate":
        if not args.output:
            raise InvalidArgumentError("--output is required for simulate")
        data = generate(sc, RngStream(args.seed))
        mapping = write_csv(data, args.output)
        if args.mapping:
            Path(args.mapping).write_text(json.dumps(mapping.to_dict(), indent=2) + "\n", encoding="utf-8")
        rec = {"record": "simulate", "scenario": sc.name, "seed": args.seed, "rows": data.n,
               "output": args.output, "mapping": mapping.to_dict(), "config": sc.to_config()}
        sys.stdout.write(json_line(rec) + "\n")
        return
    if cmd == "ci-study":
        m = run_ci_study(sc, n=None, replicates=args.replicates, reps=args.reps,
                         subset_exponent=args.subset_exponent, delta=_delta(args.level),
                         seed=args.seed, baseline=args.baseline_bootstrap, threads=args.threads,
                         reading=args.reading, centering=args.centering)
        _emit(args, _study_records(m, args.records), ci_tables(m, alpha, beta), out)
    elif cmd == "test-study":
        m = run_test_study(sc, n=None, blocks=args.blocks, reps=args.reps, seed=args.seed,
                           significance=_delta(args.level), threads=args.threads, reading=args.reading)
        _emit(args, _study_records(m, args.records), testing_tables(m, alpha, beta), out)
    else:
        m = run_timing(sc, n=None, methods=args.methods, repetitions=args.repetitions,
                       replicates=args.replicates, subset_exponent=args.subset_exponent,
                       delta=_delta(args.level), seed=args.seed, threads=args.threads,
                       reading=args.reading)
        _emit(args, _study_records(m, False), timing_tables(m), out)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
            if args.config:
                _apply_config(subs[args.command], load_config(args.config))
                args = parser.parse_args(argv)
        except SystemExit as exc:  # usage errors and --help
            return int(exc.code or 0)
        if args.seed is None:
            args.seed = _default_seed()
        if args.threads < 1:
            raise InvalidArgumentError("--threads must be at least 1")
        if args.command == "simulate" or not args.output:
            _run(args, sys.stdout)
        else:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                _run(args, fh)
    except MassmedError as exc:
        print(f"massmed: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"massmed: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
