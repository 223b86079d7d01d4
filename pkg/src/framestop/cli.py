"""Command-line driver.

    framestop run --config run.yaml [--limit N]
    framestop trace --config run.yaml [--limit N]
    framestop validate --config run.yaml

Exit status: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from .config import load_config
from .errors import FrameStopError
from .pipeline import build_engine, execute, run_pipeline


def _count(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framestop",
        description="Merge time-keyed record streams into frames and run analyses over them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run the pipeline and write trace and summary files"),
        ("trace", "print the stop trace to standard output"),
        ("validate", "check the config and record files without running"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration (YAML)")
        p.add_argument("--limit", type=_count, default=None, help="override the record limit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.limit is not None:
            config = config.with_limit(args.limit)
        if args.command == "validate":
            build_engine(config)
            print(f"ok: {len(config.sources)} sources")
        elif args.command == "trace":
            sys.stdout.write(execute(config).trace_text)
        else:
            report = run_pipeline(config).report
            print(
                f"records={report.records_supplied} vetoes={report.veto_count} "
                f"end={report.end_reason.value}"
            )
    except (FrameStopError, OSError, yaml.YAMLError) as exc:
        print(f"framestop: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
