"""Command line front end: ``mcf``, ``rates``, ``compare`` and ``simulate``.

Exit codes
----------
0 success; 1 input parse error; 2 history validation error; 3 empty cohort;
4 observation window too short / no common window; 5 degenerate test
variance; 6 invalid simulation parameters.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Sequence

from . import comparison, ingestion, mcf, simulation, transforms
from .errors import McfError
from .events import CohortSample

METRICS = [k.value for k in transforms.MetricKind]


class UsageError(McfError):
    exit_code = 1


def _emit(path: str | None, write: Callable[[io.TextIOBase], None]) -> None:
    """Write to ``path`` via a temp file and rename; ``None`` or ``-`` means stdout."""
    if path in (None, "-"):
        write(sys.stdout)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _split_input(spec: str) -> tuple[str | None, str]:
    if "=" in spec and not os.path.exists(spec):
        label, path = spec.split("=", 1)
        return label, path
    return None, spec


def _cutoff_options(text: str | None) -> dict:
    if text is None:
        return {}
    try:
        return {"cutoff_days": float(text)}
    except ValueError:
        pass
    try:
        return {"cutoff": ingestion.parse_timestamp(text)}
    except ValueError:
        raise UsageError(f"cannot parse --cutoff {text!r}") from None


def load_cohorts(args: argparse.Namespace) -> dict[str, CohortSample]:
    """Resolve cohorts from the inputs.

    ``--cohort-column`` takes precedence: labels come from that column and
    equal labels in different files are merged. Otherwise each file is one
    cohort labelled ``LABEL=`` or by its stem, and repeated labels are an
    error.
    """
    if not args.input:
        raise UsageError("at least one --input is required")
    extra = _cutoff_options(args.cutoff)
    players: dict[str, list] = {}
    for spec in args.input:
        label, path = _split_input(spec)
        if path == "-":
            content = sys.stdin.read()
            default = "stdin"
        else:
            content = Path(path).read_bytes()
            default = Path(path).stem
        if args.cohort_column:
            opts = ingestion.IngestOptions(
                delimiter=args.delimiter, cohort_column=args.cohort_column, **extra
            )
            for lab, sample in ingestion.parse_cohorts(content, opts).items():
                players.setdefault(lab, []).extend(sample.players)
        else:
            label = label or default
            if label in players:
                raise UsageError(f"cohort label {label!r} given by more than one input")
            opts = ingestion.IngestOptions(label=label, delimiter=args.delimiter, **extra)
            players[label] = list(ingestion.parse_events_csv(content, opts).players)
    return {label: CohortSample(label, tuple(ps)) for label, ps in players.items()}


def _fmt_num(x: float) -> str:
    return f"{x:.6g}"


def cmd_mcf(args: argparse.Namespace) -> int:
    cohorts = load_cohorts(args)
    curves = [
        transforms.mcf_for_metric(sample, args.metric, args.level, clamp=args.clamp)
        for sample in cohorts.values()
    ]
    writer = mcf.write_curve_json if args.format == "json" else mcf.write_curve_csv
    _emit(args.output, lambda fh: writer(curves if len(curves) > 1 else curves[0], fh))
    out = sys.stderr if args.output in (None, "-") else sys.stdout
    for curve in curves:
        point = curve.evaluate(curve.max_time)
        print(
            f"{curve.label}: m={curve.n_players} max_time={_fmt_num(curve.max_time)} "
            f"mcf={_fmt_num(point.mcf)} ci=[{_fmt_num(point.ci[0])}, {_fmt_num(point.ci[1])}] "
            f"level={curve.level}",
            file=out,
        )
    return 0


def _rates_path(output: str | None) -> str | None:
    if output in (None, "-"):
        return None
    p = Path(output)
    return str(p.with_name(f"{p.stem}_rates{p.suffix}"))


def cmd_rates(args: argparse.Namespace) -> int:
    cohorts = load_cohorts(args)
    if args.retention:
        pooled = CohortSample("all", tuple(p for s in cohorts.values() for p in s.players))
        table = transforms.retention_table(pooled, args.mode)
        if args.format == "json":
            payload = {
                "mode": table.mode.value,
                "start_day": [str(k) for k in table.cohort_keys],
                "day": [str(k) for k in table.day_keys],
                "dnu": list(table.dnu),
                "cells": [list(r) for r in table.cells],
                "dau": list(table.dau),
                "rates": [list(r) for r in table.rates],
            }
            _emit(args.output, lambda fh: comparison.dump_json(payload, fh))
        else:
            _emit(args.output, lambda fh: transforms.write_retention_csv(table, fh))
            rates_path = _rates_path(args.output)
            if rates_path is not None:
                _emit(rates_path, lambda fh: transforms.write_retention_csv(table, fh, rates=True))
        return 0

    series = {}
    for label, sample in cohorts.items():
        curve = transforms.mcf_for_metric(sample, args.metric, args.level)
        series[label] = transforms.daily_rate(curve)
    multi = len(series) > 1

    def write(fh):
        if args.format == "json":
            payload = {
                label: {"day": [d for d, _ in rows], "rate": [r for _, r in rows]}
                for label, rows in series.items()
            }
            comparison.dump_json(payload if multi else next(iter(payload.values())), fh)
            return
        fh.write(("cohort," if multi else "") + "day,rate\n")
        for label, rows in series.items():
            for d, r in rows:
                fh.write((f"{label}," if multi else "") + f"{d},{r!r}\n")

    _emit(args.output, write)
    return 0


def _test_path(args: argparse.Namespace) -> str | None:
    if args.test_output:
        return args.test_output
    if args.output in (None, "-"):
        return None
    p = Path(args.output)
    return str(p.with_name(f"{p.stem}.test.json"))


def cmd_compare(args: argparse.Namespace) -> int:
    cohorts = load_cohorts(args)
    if args.bonferroni:
        chosen = list(cohorts.values())
        if len(chosen) < 2:
            raise UsageError("--bonferroni needs at least two cohorts")
        result = comparison.k_sample_bonferroni(chosen, args.metric, args.alpha)
        _emit(args.output, lambda fh: comparison.dump_json(result.to_dict(), fh))
        out = sys.stderr if args.output in (None, "-") else sys.stdout
        print(f"adjusted alpha: {_fmt_num(result.threshold)} ({result.n_comparisons} comparisons)", file=out)
        for pair in result.pairs:
            a, b = pair.result.cohort_labels
            flag = "significant" if pair.significant else "not significant"
            print(f"{a} vs {b}: p-value {pair.result.p_value:.6g} ({flag})", file=out)
        return 0

    if args.a and args.b:
        names = [args.a, args.b]
    elif len(cohorts) == 2 and not (args.a or args.b):
        names = list(cohorts)
    else:
        raise UsageError(f"name the two cohorts with --a and --b (available: {sorted(cohorts)})")
    missing = [n for n in names if n not in cohorts]
    if missing:
        raise UsageError(f"unknown cohort(s) {missing}; available: {sorted(cohorts)}")
    sa, sb = cohorts[names[0]], cohorts[names[1]]

    curve_a = transforms.mcf_for_metric(sa, args.metric, args.level)
    curve_b = transforms.mcf_for_metric(sb, args.metric, args.level)
    diff = comparison.mcf_difference(curve_a, curve_b, args.level)
    test = comparison.two_sample_test(sa, sb, args.metric)
    report = test.to_dict()
    report["alpha"] = args.alpha
    report["reject"] = test.p_value < args.alpha
    if args.at_time is not None:
        d, v = diff.at(args.at_time)
        report["pointwise"] = {
            "time": args.at_time,
            "diff": d,
            "variance": v,
            "standardized": diff.standardized(args.at_time),
            "note": "pointwise comparison at a time fixed in advance",
        }

    if args.format == "json":
        _emit(args.output, lambda fh: comparison.dump_json(comparison.difference_to_dict(diff), fh))
    else:
        _emit(args.output, lambda fh: comparison.write_difference_csv(diff, fh))
    test_path = _test_path(args)
    if test_path is not None:
        _emit(test_path, lambda fh: comparison.dump_json(report, fh))

    out = sys.stderr if args.output in (None, "-") else sys.stdout
    if test_path is None:
        comparison.dump_json(report, out)
    print(f"{names[0]} vs {names[1]}: chi-square {test.chi_square:.6g}, p-value {test.p_value:.6g}", file=out)
    if args.at_time is not None:
        pw = report["pointwise"]
        print(
            f"pointwise at t={args.at_time}: diff {pw['diff']:.6g}, z {pw['standardized']:.6g}",
            file=out,
        )
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    params = simulation.SimParams(
        m=args.players,
        churn_rate=args.churn,
        session_rate=args.sessions,
        accrual_days=args.accrual,
        purchase_rate=args.purchases,
        purchase_mean=args.purchase_mean,
        session_length_mean=args.session_length,
        seed=args.seed,
        label=args.label,
    )
    sample = simulation.simulate_cohort(params)
    _emit(args.output, lambda fh: ingestion.write_events_csv(sample, fh))
    if params.churn_rate > 0:
        out = sys.stderr if args.output in (None, "-") else sys.stdout
        print(f"analytic asymptote (sessions/churn): {_fmt_num(simulation.analytic_asymptote(params))}", file=out)
    return 0


def _level(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcfmetrics",
        description="Mean cumulative function metrics for censored player event logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--input", action="append", default=[], metavar="[LABEL=]PATH",
                        help="event log; repeatable; '-' reads standard input")
    shared.add_argument("--metric", choices=METRICS, default="sessions")
    shared.add_argument("--level", type=_level, default=0.95, help="confidence level")
    shared.add_argument("--output", default=None, help="output path (default: standard output)")
    shared.add_argument("--format", choices=["csv", "json"], default="csv")
    shared.add_argument("--cutoff", default=None,
                        help='"YYYY-MM-DD HH:MM:SS" or elapsed days; censors players without a censored row')
    shared.add_argument("--cohort-column", default=None)
    shared.add_argument("--delimiter", default=",")

    p = sub.add_parser("mcf", parents=[shared], help="estimate the mean cumulative function")
    p.add_argument("--clamp", action="store_true", help="clip lower interval bounds at zero")
    p.set_defaults(func=cmd_mcf)

    p = sub.add_parser("rates", parents=[shared], help="daily rates or a retention table")
    p.add_argument("--retention", action="store_true", help="write the cohort-by-day retention table")
    p.add_argument("--mode", choices=[m.value for m in transforms.RetentionMode], default="sessions")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("compare", parents=[shared], help="compare cohorts")
    p.add_argument("--a", default=None)
    p.add_argument("--b", default=None)
    p.add_argument("--alpha", type=_level, default=0.05)
    p.add_argument("--at-time", type=float, default=None, help="pre-chosen time for the pointwise test")
    p.add_argument("--bonferroni", action="store_true", help="all pairwise tests with Bonferroni threshold")
    p.add_argument("--test-output", default=None, help="path of the test JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="write a synthetic event log")
    p.add_argument("--players", type=int, default=1000)
    p.add_argument("--churn", type=float, default=0.1)
    p.add_argument("--sessions", type=float, default=1.0)
    p.add_argument("--purchases", type=float, default=0.0)
    p.add_argument("--purchase-mean", type=float, default=1.0)
    p.add_argument("--session-length", type=float, default=600.0, help="mean session length, seconds")
    p.add_argument("--accrual", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="sim")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except McfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); stay quiet
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
