"""Command line entry point: ``coopsense run | list-scenarios | validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..fusion import FEATURE, PIXEL
from .report import emit_report
from .runner import TRANSPORTS, run_scenario
from .scenario import MODES, ScenarioError, ScenarioSpec, list_scenarios, resolve_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKS = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopsense", description="Cooperative perception scenario runner")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write its metrics report")
    run.add_argument("--scenario", required=True, help="shipped scenario name or path to a YAML file")
    run.add_argument("--mode", choices=MODES, default="coop")
    run.add_argument("--fusion", choices=(FEATURE, PIXEL), default=FEATURE)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--ticks", type=int, default=None, help="override the scenario duration")
    run.add_argument("--out", required=True)
    run.add_argument("--transport", choices=TRANSPORTS, default="inproc")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--no-check", action="store_true", help="exit 0 even if scenario checks fail")

    sub.add_parser("list-scenarios", help="print shipped scenario names")

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("file")
    return parser


def _run(args) -> int:
    try:
        spec = ScenarioSpec(
            resolve_scenario(args.scenario), args.mode, args.fusion, args.seed, args.ticks
        )
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_scenario(spec, transport=args.transport)
    try:
        paths = emit_report(report, args.out, args.format)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, ok in report.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print("wrote " + ", ".join(str(p) for p in paths))
    if not report.passed and not args.no_check:
        return EXIT_CHECKS
    return EXIT_OK


def _validate(path: str) -> int:
    try:
        scenario = resolve_scenario(path)
    except ScenarioError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {scenario.name} ({len(scenario.actors)} actors, {len(scenario.roadside)} roadside)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.command == "list-scenarios":
        for name in list_scenarios():
            print(name)
        return EXIT_OK
    if args.command == "validate":
        return _validate(args.file)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
