"""Command-line entry point for the empirical wavelet toolkit."""

from __future__ import annotations

import argparse
import os
import pathlib
import sys
from typing import Any, Dict, List, Optional


# **********************************************************
# Update sys.path before importing any bundled libraries.
# **********************************************************
def update_sys_path(path_to_add: str, strategy: str) -> None:
    """Add given path to `sys.path`."""
    if path_to_add not in sys.path and os.path.isdir(path_to_add):
        if strategy == "useBundled":
            sys.path.insert(0, path_to_add)
        elif strategy == "fromEnvironment":
            sys.path.append(path_to_add)


# Ensure that we can import numerical libraries, and other bundled libraries.
update_sys_path(
    os.fspath(pathlib.Path(__file__).parent.parent / "libs"),
    os.getenv("EWT_IMPORT_STRATEGY", "useBundled"),
)

# **********************************************************
# Imports needed for the toolkit go below this.
# **********************************************************
# pylint: disable=wrong-import-position,import-error
import ewt_log
from ewt_config import KERNEL_CHOICES, MAPPER_CHOICES, PARTITION_CHOICES, load_config
from ewt_io import modes_document, to_gray8, write_json, write_pfm, write_png
from ewt_log import log_always, log_error
from ewt_pipeline import run_pipeline
from ewt_toy import make_toy_image
from ewt_utils import EwtError, EwtNumericalError, EwtValidationError, root_cause

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

# subcommand -> last pipeline stage to run
STAGE_COMMANDS = {
    "detect": "detect",
    "partition": "partition",
    "map": "map",
    "filters": "filters",
    "frame": "frame",
    "transform": "transform",
    "reconstruct": "reconstruct",
    "run": None,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", nargs="?", help="grayscale PGM/PNG/PFM image; the toy image when omitted")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--kernel", choices=KERNEL_CHOICES)
    parser.add_argument("--partition", choices=PARTITION_CHOICES)
    parser.add_argument("--mapper", choices=MAPPER_CHOICES)
    parser.add_argument("--s0", type=float, help="scale-space birth threshold")
    parser.add_argument("--dual-floor", type=float, dest="dual_floor")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="toy image seed")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ewt", description="Empirical wavelet transforms of 2D images.")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in list(STAGE_COMMANDS) + ["toy"]:
        _add_common(commands.add_parser(name))
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "input": args.input,
        "kernel": args.kernel,
        "partition": args.partition,
        "mapper": args.mapper,
        "dual_floor": args.dual_floor,
        "out": args.out,
    }
    if args.s0 is not None:
        overrides["scale_space"] = {"s0": args.s0}
    if args.seed is not None:
        overrides["toy"] = {"seed": args.seed}
    return overrides


def _write_toy(config) -> None:
    toy = config.toy
    image, truth = make_toy_image(toy.width, toy.height, toy.num_waves, toy.seed, toy.noise)
    out = pathlib.Path(config.out)
    write_pfm(out / "toy.pfm", image.data)
    write_png(out / "toy.png", to_gray8(image.data))
    write_json(out / "toy_modes.json", modes_document(truth))
    log_always(f"toy image written to {out / 'toy.pfm'}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    ewt_log.configure(verbose=args.verbose)
    try:
        config = load_config(args.config, _overrides(args))
        if args.command == "toy":
            _write_toy(config)
        else:
            run_pipeline(config, stop_after=STAGE_COMMANDS[args.command])
    except EwtError as exc:
        cause = root_cause(exc)
        if isinstance(cause, EwtValidationError):
            log_error(f"validation failure: {cause}")
            return EXIT_VALIDATION
        if isinstance(cause, EwtNumericalError):
            log_error(f"numerical failure: {cause}")
            return EXIT_NUMERICAL
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
