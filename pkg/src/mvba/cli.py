"""Command-line runner: single runs, sweeps, CSV/JSON reports.

Exit codes: 0 ok, 1 usage error, 2 configuration error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from typing import Sequence, TextIO

from mvba.adversary import parse_params
from mvba.net import ConfigError, InvariantViolation, RunConfig, RunReport, bits_bound, c_star, run

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3

REPORT_FIELDS = (
    "n",
    "t",
    "c",
    "l",
    "adversary",
    "seed",
    "bits_total",
    "bits_data",
    "bits_subprotocol",
    "broadcast_phases",
    "overhead",
    "bits_bound",
    "c_star",
    "bound_ok",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve for config errors
        raise UsageError(message)


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mvba", description="Simulate coded multi-valued Byzantine agreement.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--adversary-params", default="", help="key=value,... passed to the strategy")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", default="-", help="report path, - for stdout")

    r = sub.add_parser("run", help="one run")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--t", type=int, required=True)
    r.add_argument("--c", type=_positive, required=True)
    r.add_argument("--l", type=_positive, required=True)
    r.add_argument("--adversary", default="honest")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--transcript", metavar="PATH", help="write the message transcript here")
    common(r)

    s = sub.add_parser("sweep", help="cartesian product of comma-separated values")
    s.add_argument("--n", type=_int_list, required=True)
    s.add_argument("--t", type=_int_list, help="default: largest t with n > 3t")
    s.add_argument("--c", type=_int_list, default=[256])
    s.add_argument("--l", type=_int_list, default=[100_000])
    s.add_argument("--adversary", type=_str_list, default=["honest"])
    s.add_argument("--seed", type=_int_list, default=[0])
    common(s)
    return p


def report_row(report: RunReport) -> dict:
    bound = bits_bound(report.n, report.t, report.l, report.b_measured)
    return {
        "n": report.n,
        "t": report.t,
        "c": report.c,
        "l": report.l,
        "adversary": report.adversary,
        "seed": report.seed,
        "bits_total": report.bits_total,
        "bits_data": report.bits_data,
        "bits_subprotocol": report.bits_subprotocol,
        "broadcast_phases": report.broadcast_phases,
        "overhead": report.overhead,
        "bits_bound": bound,
        "c_star": c_star(report.n, report.t, report.l),
        "bound_ok": report.bits_total <= bound,
    }


def emit_report(reports: Sequence[RunReport], fmt: str, fh: TextIO) -> None:
    rows = [report_row(r) for r in reports]
    if fmt == "json":
        json.dump(rows if len(rows) != 1 else rows[0], fh, indent=2)
        fh.write("\n")
        return
    w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def read_report(text: str, fmt: str) -> list[dict]:
    """Parse what :func:`emit_report` wrote back into typed rows."""
    if fmt == "json":
        data = json.loads(text)
        return data if isinstance(data, list) else [data]
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row: dict = {}
        for k, v in raw.items():
            if k == "adversary":
                row[k] = v
            elif k == "bound_ok":
                row[k] = v == "True"
            elif k in ("overhead", "bits_bound", "c_star"):
                row[k] = float(v)
            else:
                row[k] = int(v)
        rows.append(row)
    return rows


def _configs(args) -> list[RunConfig]:
    params = parse_params(args.adversary_params)
    if args.command == "run":
        return [RunConfig(args.n, args.t, args.c, args.l, args.adversary, params, args.seed, bool(args.transcript))]
    out = []
    for n, c, l, adv, seed in itertools.product(args.n, args.c, args.l, args.adversary, args.seed):
        for t in args.t or [max((n - 1) // 3, 1)]:
            if c < 1 or l < 1:
                raise UsageError("c and l must be positive")
            out.append(RunConfig(n, t, c, l, adv, params if adv != "honest" else {}, seed, False))
    return out


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configs = _configs(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    reports = []
    try:
        for cfg in configs:
            report, transcript = run(cfg)
            reports.append(report)
            if args.command == "run" and args.transcript:
                with open(args.transcript, "w") as fh:
                    transcript.write(fh)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    if args.out == "-":
        emit_report(reports, args.format, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            emit_report(reports, args.format, fh)
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

