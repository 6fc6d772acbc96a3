"""Command-line entry point.

`hypergame-opt run <file> --out <dir>` executes a scenario file and writes
one CSV (plus figures) under the output directory; `hypergame-opt verify`
runs the acceptance suite. Exit codes: 0 success, 1 solver failure, 2 input
error. HYPERGAME_OPT_LOG selects error/info/debug logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import report
from .errors import HypergameOptError, ParseError, UnknownMode

log = logging.getLogger("hypergameopt")

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_INPUT_ERROR = 2


def _setup_logging() -> None:
    level_name = os.environ.get("HYPERGAME_OPT_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level_name not in levels:
        print(f"warning: HYPERGAME_OPT_LOG={level_name!r} not in "
              f"{sorted(levels)}; using error", file=sys.stderr)
        level_name = "error"
    logging.basicConfig(level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypergame-opt",
        description="Adversarial perception attacks on optimal controllers: "
                    "batch scenario runner and result tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("file", help="scenario file (key=value, [scenario] sections)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--jobs", type=int, default=1,
                     help="worker pool size (default 1)")
    run.add_argument("--round", type=int, default=None, dest="ndigits",
                     help="display rounding for CSV values (default: full precision)")
    run.add_argument("--seed", type=int, default=None,
                     help="seed for sampling-based diagnostics (bundled "
                          "scenarios are deterministic and ignore it)")
    run.add_argument("--no-figures", action="store_true",
                     help="skip SVG figure generation")

    verify = sub.add_parser("verify", help="run the acceptance suite")
    verify.add_argument("--fast", action="store_true",
                        help="skip the long-horizon cases")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        sfile, results = report.run_scenarios(args.file, jobs=args.jobs,
                                              seed=args.seed)
    except (ParseError, UnknownMode) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / (Path(args.file).stem + ".csv")
    csv_path.write_text(report.results_to_csv(sfile, results, args.ndigits))
    print(f"wrote {csv_path}")
    if not args.no_figures:
        try:
            for path in report.emit_figures(sfile, results, out_dir / "figures"):
                print(f"wrote {path}")
        except HypergameOptError as exc:
            print(f"figure error: {exc}", file=sys.stderr)
            return EXIT_SOLVER_FAILURE
    bad = report.failures(results)
    if bad:
        for line in bad:
            print(f"solver failure: {line}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    from . import acceptance

    results = acceptance.run_all(fast=args.fast)
    ok = acceptance.print_report(results)
    return EXIT_OK if ok else EXIT_SOLVER_FAILURE


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        code = _cmd_run(args)
    else:
        code = _cmd_verify(args)
    return code


if __name__ == "__main__":
    sys.exit(main())
