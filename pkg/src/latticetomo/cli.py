"""Command-line interface: run, compare, sweep, show-defaults.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    HUSIMI_DEFAULT_CONFIG,
    WIGNER_DEFAULT_CONFIG,
    parse_config,
)
from .errors import ConfigError, NumericalError
from .runner import compare, emit, load_bundle, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticetomo",
        description="Simulated phase-space tomography of lattice-trapped atoms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment configuration")
    run_p.add_argument("--config", required=True, help="path to the YAML run configuration")
    run_p.add_argument("--out", default=None, help="output directory (overrides config)")
    run_p.add_argument("--seed", type=int, default=None, help="override the noise seed")
    run_p.add_argument("--mode", choices=("exact", "noise"), default=None,
                       help="override the sampling mode")
    run_p.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto)")

    cmp_p = sub.add_parser("compare", help="recompute an emitted bundle from first principles")
    cmp_p.add_argument("--out", required=True, help="directory holding records.csv and summary.json")

    sweep_p = sub.add_parser("sweep", help="expand one config into a family of configs")
    sweep_p.add_argument("--config", required=True, help="base configuration file")
    sweep_p.add_argument("--key", required=True, help="dotted key to vary, e.g. lattice.depth")
    sweep_p.add_argument("--values", required=True,
                         help="semicolon-separated replacement values, e.g. '10 Er;20 Er;37 Er'")
    sweep_p.add_argument("--out", required=True, help="directory for the generated configs")

    sub.add_parser("show-defaults", help="print the two built-in experiment configurations")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "show-defaults":
            print("# husimi experiment (deep lattice)")
            print(HUSIMI_DEFAULT_CONFIG)
            print("# wigner experiment (two-bound-state lattice)")
            print(WIGNER_DEFAULT_CONFIG)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        with open(args.config) as handle:
            text = handle.read()
    except OSError as exc:
        print(f"i/o error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    config = parse_config(text)
    config = _apply_overrides(config, args)
    bundle = run(config, threads=args.threads)
    out_dir = args.out or config.output_directory
    written = emit(bundle, out_dir)
    for path in written:
        print(path)
    for warning in bundle.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _apply_overrides(config, args):
    from dataclasses import replace

    if args.seed is not None:
        config = replace(config, noise=config.noise._replace(seed=args.seed))
    if args.mode is not None:
        config = replace(config, sampling=args.mode)
    if args.out is not None:
        config = replace(config, output_directory=args.out)
    return config


def _cmd_compare(args) -> int:
    config, rows = load_bundle(args.out)
    report = compare(config, rows)
    import json

    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    import os

    import yaml

    with open(args.config) as handle:
        base = yaml.safe_load(handle.read()) or {}
    section, _, key = args.key.partition(".")
    if not key:
        raise ConfigError(f"sweep key must be dotted section.key, got {args.key!r}")
    values = [v.strip() for v in args.values.split(";") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    os.makedirs(args.out, exist_ok=True)
    for i, value in enumerate(values):
        variant = json_roundtrip(base)
        variant.setdefault(section, {})
        if variant[section] is None:
            variant[section] = {}
        variant[section][key] = yaml.safe_load(value)
        text = yaml.safe_dump(variant, sort_keys=True)
        parse_config(text)  # validate before writing
        path = os.path.join(args.out, f"config_{i:03d}.yaml")
        with open(path, "w") as handle:
            handle.write(text)
        print(path)
    return EXIT_OK


def json_roundtrip(obj):
    import copy

    return copy.deepcopy(obj)


if __name__ == "__main__":
    sys.exit(main())
