"""Command-line pipeline runner.

Exit codes: 0 success, 1 runtime failure, 2 description/validation errors.
"""

from __future__ import annotations

import argparse
import sys

from .errors import TenspipeError
from .graph import export_dot
from .runtime import Pipeline, State
from .stats import RunStats


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenspipe",
        description="Run tensor stream pipelines described in launch syntax.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="parse, validate, and run a pipeline")
    run.add_argument("pipeline", help="pipeline description string")
    run.add_argument("--timeout", type=float, default=30.0,
                     metavar="S", help="abort the run after S seconds")
    run.add_argument("--paced", action="store_true",
                     help="honor source frame rates in wall time")
    run.add_argument("--stats", action="store_true",
                     help="also print statistics as JSON")
    run.add_argument("--dot", metavar="PATH",
                     help="write the pipeline graph in GraphViz format")
    run.add_argument("--quiet", action="store_true",
                     help="suppress the statistics table")
    return parser


def _cmd_run(args) -> int:
    try:
        pipe = Pipeline(args.pipeline, paced=args.paced)
        pipe.set_state(State.READY)
    except TenspipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(export_dot(pipe.graph))
    try:
        report = pipe.run_until_eos(timeout=args.timeout)
    finally:
        pipe.set_state(State.NULL)
    stats = RunStats.from_report(report)
    if not args.quiet:
        print(stats.render_table())
    if args.stats:
        print(stats.to_json())
    return 0 if report.ok else 1


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
