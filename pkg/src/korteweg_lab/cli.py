"""Command line entry point: one subcommand per experiment.

Exit status: 0 when every check passes, 1 when a check fails, 2 for usage
or configuration errors, 3 for numerical failures (non-finite values,
bracketing failures, vacuum, instability, CFL violations).
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .experiments import EXPERIMENTS, ConfigError, run, validate_config, write_table
from .params import BracketError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message format
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="korteweg-lab", description="Numerical experiments for the nonlocal capillary system.")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON configuration file (defaults are used when omitted)")
        sp.add_argument("--out", help="output file (stdout when omitted)")
        sp.add_argument("--format", choices=("csv", "json"), default=None, help="output format")
        sp.add_argument("--seed", type=int, default=None, help="override the configuration seed")
        sp.add_argument("--quiet", action="store_true", help="do not print check lines")
    return parser


def _load(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _load(args.config)
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "the configuration must be a JSON object")
        raw = dict(raw)
        raw.setdefault("experiment", args.experiment)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed", "must be non-negative")
            raw["seed"] = args.seed
        cfg = validate_config(raw, args.experiment)
    except ConfigError as exc:
        print(f"korteweg-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"korteweg-lab: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    fmt = args.format or cfg.output["format"]
    out = args.out or cfg.output["path"]
    try:
        result = run(cfg)
    except (FloatingPointError, BracketError, ArithmeticError) as exc:
        print(f"korteweg-lab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    if out:
        write_table(result.table, out, fmt)
    else:
        sys.stdout.write(result.table.to_csv() if fmt == "csv" else result.table.to_json())
    if not args.quiet:
        for c in result.checks:
            status = "PASS" if c.passed else "FAIL"
            print(f"[{status}] {c.name} {c.detail}".rstrip(), file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
