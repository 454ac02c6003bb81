"""Command-line entry point.

Exit codes: 0 success, 1 configuration/usage error, 2 data/format error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .config import load_config
from .errors import (
    CoincidentLocationError,
    ConfigError,
    CsiFormatError,
    EmptySidelobeError,
    ShapeMismatchError,
    SingularEfimError,
)
from . import runners

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 instead of argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="override the seed")
    parser.add_argument("--out-dir", help="override the output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mimoloc",
                     description="OFDM massive-MIMO localization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("simulate", "synthesize a CSI capture and truth sidecar"),
        ("crlb-sweep", "bound RMSE versus offset level and array size"),
        ("saf", "ambiguity maps, cuts and PMSR per scenario"),
        ("pmsr-sweep", "PMSR degradation versus offset level"),
    ):
        _add_config_args(sub.add_parser(name, help=text))

    cal = sub.add_parser("calibrate-localize",
                         help="three-stage calibration and localization")
    _add_config_args(cal)
    cal.add_argument("--csi", required=True, help="CSIB capture path")
    cal.add_argument("--truth", required=True, help="ground-truth sidecar path")

    ins = sub.add_parser("inspect", help="dump a CSIB header and basic stats")
    ins.add_argument("path", help="CSIB file to inspect")
    return parser


def _resolve_config(args: argparse.Namespace):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out_dir is not None:
        overrides.append(f"out_dir={args.out_dir}")
    return load_config(args.config, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "inspect":
            print(json.dumps(runners.run_inspect(args.path), indent=2, sort_keys=True))
            return EXIT_OK
        config = _resolve_config(args)
        if args.command == "simulate":
            outputs = runners.run_simulate(config)
        elif args.command == "crlb-sweep":
            outputs = {"csv": runners.run_crlb_sweep(config)}
        elif args.command == "saf":
            outputs = runners.run_saf(config)
        elif args.command == "pmsr-sweep":
            outputs = {"csv": runners.run_pmsr_sweep(config)}
        else:
            outputs = runners.run_calibrate_localize(config, args.csi, args.truth)
        for key in sorted(outputs):
            print(f"{key}: {outputs[key]}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CsiFormatError, ShapeMismatchError, FileNotFoundError, IsADirectoryError,
            PermissionError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularEfimError, EmptySidelobeError, CoincidentLocationError,
            FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
