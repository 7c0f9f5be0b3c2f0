"""Command-line entry point: ``qtstomo {spectrum,sweep,evolve,validate}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import commands
from .bath import QuadratureError
from .config import ConfigError, from_dict, parse_config, preset, with_overrides
from .eigensolver import ConvergenceError
from .io import header_lines, write_table, write_tree
from .master import IntegrationFailure

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtstomo", description=__doc__)
    p.add_argument("command", choices=["spectrum", "sweep", "evolve", "validate"])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="YAML or JSON run configuration")
    src.add_argument("--preset", choices=["fig3", "fig4", "smoke"])
    p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["table", "tree"])
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load(args):
    if args.preset:
        cfg = from_dict(preset(args.preset))
    else:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    overrides = {}
    if args.command != "validate":
        overrides["experiment.command"] = args.command
    if args.seed is not None:
        overrides["experiment.seed"] = args.seed
    if args.format is not None:
        overrides["output.format"] = args.format
    if args.out is not None:
        overrides["output.dir"] = str(args.out)
    return with_overrides(cfg, **overrides) if overrides else cfg


def header_config(cfg) -> dict:
    d = cfg.resolved()
    # the output location is not part of the experiment
    d["output"].pop("dir", None)
    return d


def write_result(cfg, name: str, result: commands.CommandResult) -> list[Path]:
    out = Path(cfg.output.dir)
    header = header_lines(header_config(cfg), result.notes)
    written = []
    if cfg.output.format == "tree":
        payload = {"tables": {k: {"columns": c, "rows": r} for k, (c, r) in result.tables.items()}}
        path = out / f"{name}.json"
        write_tree(path, header, payload)
        written.append(path)
    else:
        for table, (cols, rows) in result.tables.items():
            path = out / f"{table}.csv"
            write_table(path, header, cols, rows)
            written.append(path)
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args)
    except (ConfigError, OSError) as err:
        print(f"configuration error:\n{err}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        print(json.dumps(cfg.resolved(), sort_keys=True, indent=1))
        return EXIT_OK
    try:
        if args.command == "sweep":
            result = commands.sweep(cfg, threads=args.threads)
        else:
            result = commands.COMMANDS[args.command](cfg)
    except (ConvergenceError, IntegrationFailure, QuadratureError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    for note in result.notes:
        if note.startswith("warning"):
            print(note, file=sys.stderr)
    for path in write_result(cfg, args.command, result):
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
