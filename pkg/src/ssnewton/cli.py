"""Command line interface.

``ssnewton run --config cfg.json --mode <mode> --out <dir>`` drives the
benchmark experiments; ``ssnewton certify-pair --in <file>`` checks a
matrix pair read from a text file and prints the certificate as JSON.
Exit codes: 0 success, 1 validation error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .eigencomp import PairSymmetryError, check_pair, load_pair_file
from .experiments import MODES, ConfigError, ExperimentConfig, run
from .newton import SolverFailure

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssnewton",
        description="Semismooth Newton solver experiments and pair certification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark experiment")
    p_run.add_argument("--config", required=True, help="problem config JSON file")
    p_run.add_argument("--mode", required=True, choices=MODES)
    p_run.add_argument("--out", required=True, help="output directory")

    p_cert = sub.add_parser("certify-pair", help="certify a matrix pair from a file")
    p_cert.add_argument(
        "--in", dest="infile", required=True,
        help="text file: first line L, then L rows of F and L rows of G",
    )
    return parser


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.from_json_file(args.config, args.mode, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        written = run(cfg)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for name, path in written.items():
        print(f"{name}: {path}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    try:
        pair = load_pair_file(args.infile)
    except (OSError, ValueError, PairSymmetryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    cert = check_pair(pair)
    print(json.dumps(cert.to_dict(), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; bad arguments
        # are validation errors under this tool's exit-code contract.
        code = exc.code if isinstance(exc.code, int) else 1
        return EXIT_OK if code == 0 else EXIT_VALIDATION
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_certify(args)


if __name__ == "__main__":
    sys.exit(main())
