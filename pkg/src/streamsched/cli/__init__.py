"""Command-line entry point: ``streamsched validate | juice | run``.

Exit status: 0 on success, 1 for domain errors (invalid topology, missing
counters, bad scenario content), 2 for I/O and usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..juice import topology_juice
from ..metrics import InsufficientData
from ..runner import run_scenario
from ..topology import TopologyError, validate
from ..utility import UtilityError
from ..workload import TraceError
from .files import FileFormatError, load_scenario, load_stats, load_topology

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


def cmd_validate(args: argparse.Namespace) -> int:
    spec = load_topology(args.topology)
    report = validate(spec)
    for v in report:
        print(v)
    if report:
        return EXIT_DOMAIN
    print(f"{spec.id}: ok")
    return EXIT_OK


def cmd_juice(args: argparse.Namespace) -> int:
    spec = load_topology(args.topology)
    report = validate(spec)
    if report:
        for v in report:
            print(v, file=sys.stderr)
        return EXIT_DOMAIN
    counters = load_stats(args.stats)
    try:
        result = topology_juice(spec, counters)
    except InsufficientData as err:
        print(f"insufficient data: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    print("operator,source,juice")
    for (op, source), value in sorted(result.per_operator.items()):
        print(f"{op},{source},{value:.6f}")
    print(f"topology_juice,{result.topology_juice:.6f}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    report = run_scenario(
        scenario, use_scheduler=not args.no_scheduler, seed=args.seed, trace=args.trace
    )
    out_dir = args.out_dir or Path("runs") / scenario.name
    paths = report.write(out_dir)
    cluster = report.summary["cluster"]
    print(
        f"{scenario.name}: final utility {cluster['final_total_utility']:.6f}"
        f" of {cluster['max_total_utility']:.6f}"
    )
    for name, path in sorted(paths.items()):
        print(f"  {name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamsched", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and info")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a topology file")
    p.add_argument("topology", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("juice", help="compute juice from one window of edge counters")
    p.add_argument("topology", type=Path)
    p.add_argument("stats", type=Path, help="CSV: parent,child,sent,executed")
    p.set_defaults(func=cmd_juice)

    p = sub.add_parser("run", help="simulate a scenario and write reports")
    p.add_argument("scenario", type=Path)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out-dir", type=Path, default=None)
    p.add_argument("--no-scheduler", action="store_true", help="baseline arm: never act")
    p.add_argument("--trace", action="store_true", help="also write per-tick trace.csv")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except (FileFormatError, TraceError, TopologyError, UtilityError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
