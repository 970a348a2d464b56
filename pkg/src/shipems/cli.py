"""Command-line interface.

Subcommands: run a mission to CSV/JSON artifacts, validate a scenario
file, execute the built-in verification suite, or serve a paced
session over HTTP. Exit codes: 0 success, 1 validation or check
failure, 2 runtime infeasibility.
"""

from __future__ import annotations

import argparse
import json
import sys

from .mission import run_mission, write_trace
from .mpc import InfeasibleEnvelopeError
from .scenario import Scenario, ScenarioError, default_scenario, load_scenario

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


def _load(path: str | None) -> Scenario:
    return load_scenario(path) if path else default_scenario()


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    frames, metrics = run_mission(scenario)
    if args.trace:
        write_trace(frames, args.trace)
    document = json.dumps(metrics.json_dict(), indent=2)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            fh.write(document + "\n")
    else:
        print(document)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    _load(args.scenario)
    print(f"{args.scenario}: OK")
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    from .selftest import run_all

    results = run_all()
    for result in results:
        print(result.line())
    failed = sum(1 for r in results if not r.passed)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_INVALID


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    scenario = _load(args.scenario)
    serve(scenario, host=args.host, port=args.port, speed=args.speed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shipems",
        description="Shipboard DC microgrid energy management simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a mission and write artifacts")
    run_p.add_argument("--scenario", help="scenario JSON (default: built-in mission)")
    run_p.add_argument("--trace", help="destination for the telemetry CSV")
    run_p.add_argument("--metrics", help="destination for metrics JSON (default: stdout)")
    run_p.set_defaults(func=cmd_run)

    val_p = sub.add_parser("validate", help="parse and validate a scenario file")
    val_p.add_argument("--scenario", required=True, help="scenario JSON to check")
    val_p.set_defaults(func=cmd_validate)

    self_p = sub.add_parser("selftest", help="run the built-in verification suite")
    self_p.set_defaults(func=cmd_selftest)

    serve_p = sub.add_parser("serve", help="run a paced session behind an HTTP API")
    serve_p.add_argument("--scenario", help="scenario JSON (default: built-in mission)")
    serve_p.add_argument("--host", default="127.0.0.1", help="bind address")
    serve_p.add_argument("--port", type=int, default=8787, help="TCP port")
    serve_p.add_argument("--speed", type=float, default=1.0, help="time multiplier")
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleEnvelopeError as exc:
        print(f"error: infeasible operating point: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
