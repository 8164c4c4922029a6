"""Command-line entry point: ``t2m verify`` and ``t2m fixtures list``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import fixture_catalog, load_fixture, resolve_fixture
from .errors import ConfigError, T2MError
from .suites import SUITES, Tolerances, run_suite


def _positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"tolerance must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t2m", description="Verify second-order tangent bundle constructions on fixtures.")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run a verification suite on a fixture")
    verify.add_argument("--config", required=True, help="fixture name or path to a TOML fixture")
    verify.add_argument("--suite", default="all", choices=("all",) + SUITES)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--tol-struct", type=_positive, default=1e-10, help="tolerance for structural identities")
    verify.add_argument("--tol-fd", type=_positive, default=1e-6, help="tolerance for finite-difference comparisons")
    verify.add_argument("--tol-metric", type=_positive, default=1e-8, help="tolerance for metric-derived connections")
    verify.add_argument("--tol-exact", type=_positive, default=1e-12, help="tolerance for exact linear-algebra identities")
    verify.add_argument("--out", help="write the JSON report here instead of stdout")
    verify.add_argument("--config-dir", help="extra directory of *.toml fixtures")

    fixtures = sub.add_parser("fixtures", help="fixture catalog")
    fsub = fixtures.add_subparsers(dest="action", required=True)
    lst = fsub.add_parser("list", help="list available fixtures")
    lst.add_argument("--config-dir", help="extra directory of *.toml fixtures")
    return parser


def _verify(args) -> int:
    fixture = resolve_fixture(args.config, args.config_dir)
    tol = Tolerances(args.tol_struct, args.tol_fd, args.tol_metric, args.tol_exact)
    report = run_suite(fixture, args.suite, args.seed, tol)
    text = report.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(report.summary(), file=sys.stderr)
    return 0 if report.passed else 1


def _list(args) -> int:
    for name, path in fixture_catalog(args.config_dir).items():
        try:
            desc = load_fixture(path).description
        except ConfigError as exc:
            desc = f"<invalid: {exc}>"
        print(f"{name}\t{desc}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _verify(args)
        return _list(args)
    except T2MError as exc:
        print(f"t2m: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
