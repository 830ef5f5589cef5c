"""Command line entry point: ``probris run <spec>`` and ``probris bench <spec>``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .errors import ProbRisError

log = logging.getLogger("probris")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="probris", description="RIS phase-optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run the experiment described by a JSON spec file"),
        ("bench", "time single solver iterations over the spec's N sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="path to a JSON experiment spec")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--realizations", type=int, help="override the number of channel realizations")
        p.add_argument("--out", help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = ex.ExperimentSpec.load(args.spec)
        if args.seed is not None:
            spec.seed = args.seed
        if args.realizations is not None:
            spec.realizations = args.realizations
        if args.out is not None:
            spec.out = args.out
        spec.__post_init__()
        result = ex.run(spec) if args.command == "run" else ex.bench(spec)
    except (ProbRisError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    log.info("wrote %s and %s", result.csv_path, result.json_path)
    if result.failures:
        print(f"warning: {result.failures} solver runs failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
