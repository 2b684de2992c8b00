"""Command-line experiment runner.

    slabsolve run <config-file> [--outdir DIR] [--threads N]
    slabsolve preset <name> [--override key=val ...] [--outdir DIR] [--threads N]
    slabsolve list-presets
"""

import argparse
import sys

from slabsolve.config import ConfigError, apply_overrides, parse_config
from slabsolve.experiments import run
from slabsolve.presets import list_presets, preset_values


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="slabsolve",
        description="Overlapping-slab interface solver experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="path to the key/value config file")
    p_run.add_argument("--outdir", default=".", help="output directory")
    p_run.add_argument("--threads", type=int, default=1, help="worker cap")

    p_preset = sub.add_parser("preset", help="run a named preset")
    p_preset.add_argument("name")
    p_preset.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VAL",
        help="override a config key (repeatable)",
    )
    p_preset.add_argument("--outdir", default=".", help="output directory")
    p_preset.add_argument("--threads", type=int, default=1, help="worker cap")

    sub.add_parser("list-presets", help="print the available preset names")

    args = parser.parse_args(argv)

    if args.command == "list-presets":
        for name in list_presets():
            print(name)
        return 0

    try:
        if args.command == "run":
            with open(args.config) as fh:
                values = parse_config(fh.read())
        else:
            values = apply_overrides(preset_values(args.name), args.override)
    except (ConfigError, KeyError, OSError) as exc:
        print(exc, file=sys.stderr)
        return 1

    try:
        out = run(values, outdir=args.outdir, threads=args.threads)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:  # solver failure: nonzero exit, loud
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 2

    for csv_name, rows in out.items():
        print(f"{csv_name}: {len(rows)} rows")
    return 0


if __name__ == "__main__":
    sys.exit(main())
