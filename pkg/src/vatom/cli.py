"""Command-line front end: run experiments, analyze series, list presets."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__, presets
from .errors import VatomError
from .runner import ExperimentConfig, run_analyses_on_series, run_experiment


def _threads_from(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("VATOM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise VatomError(f"VATOM_THREADS={env!r} is not an integer") from None
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vatom",
        description="V-type atom + Kerr mode simulator and time-series analysis",
    )
    parser.add_argument("--version", action="version",
                        version=f"vatom {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config or preset")
    run_p.add_argument("config",
                       help="path to a TOML config, or the name of a preset")
    run_p.add_argument("--out", default="vatom_out", help="output directory")
    run_p.add_argument("--paper-scale", action="store_true",
                       help="use the full published series lengths")
    run_p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: VATOM_THREADS or all)")

    an_p = sub.add_parser("analyze", help="apply analyses to a stored series")
    an_p.add_argument("series", help="series file (.bin or .csv)")
    an_p.add_argument("analysis_config", help="TOML file with [[analysis]] tables")
    an_p.add_argument("--out", default="vatom_out", help="output directory")
    an_p.add_argument("--threads", type=int, default=None)

    pre_p = sub.add_parser("presets", help="preset catalog")
    pre_sub = pre_p.add_subparsers(dest="presets_command", required=True)
    pre_sub.add_parser("list", help="list bundled presets")
    show = pre_sub.add_parser("show", help="print one preset config")
    show.add_argument("name")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            path = Path(args.config)
            if path.is_file():
                config = ExperimentConfig.from_file(path)
            else:
                config = presets.load_preset(args.config)
            manifest = run_experiment(config, args.out,
                                      paper_scale=args.paper_scale,
                                      threads=_threads_from(args))
            print(manifest)
            return 0
        if args.command == "analyze":
            manifest = run_analyses_on_series(args.series, args.analysis_config,
                                              args.out)
            print(manifest)
            return 0
        if args.command == "presets":
            if args.presets_command == "list":
                for name in presets.list_presets():
                    print(name)
            else:
                print(presets.preset_path(args.name).read_text(), end="")
            return 0
    except VatomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
