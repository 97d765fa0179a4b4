"""Command-line entry point: ``parvi run|sweep|validate``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys

from .config import ConfigError, load_config
from .experiment import STATUS_OK, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BLOWUP = 3


def _run_one(path) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    result = run_experiment(cfg)
    if result.status != STATUS_OK:
        print(f"{path}: numeric blow-up after {len(result.metrics)} records: {result.message}", file=sys.stderr)
        return EXIT_BLOWUP
    last = result.metrics[-1] if result.metrics else {}
    print(f"{path}: ok -> {cfg.output_dir} {json.dumps(last)}")
    return EXIT_OK


def cmd_run(args) -> int:
    return _run_one(args.config)


def cmd_sweep(args) -> int:
    paths = sorted(p for pattern in args.patterns for p in glob.glob(pattern))
    if not paths:
        print(f"no config files match {' '.join(args.patterns)}", file=sys.stderr)
        return EXIT_INVALID
    codes = [_run_one(p) for p in paths]
    return max(codes)


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps({"config": cfg.to_dict(), "resolved": {k: v for k, v in cfg.resolved.items() if k != "base_dir"}}, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parvi", description="Particle-based variational inference experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every config matching the glob(s)")
    p.add_argument("patterns", nargs="+", metavar="config-glob")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a config and print it with defaults applied")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
