"""Command line entry point: ``robos run|validate|presets``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, dump_config, load_config, parse_seeds
from .harness import EXIT_CONFIG, EXIT_OK, run_experiment

PRESET_DIR = Path(__file__).parent / "presets"
OUTPUT_ROOT_ENV = "ROBOS_OUTPUT_ROOT"


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))


def resolve_config_path(name_or_path: str) -> Path:
    """A path to a YAML file, or the name of a bundled preset."""
    p = Path(name_or_path)
    if p.exists():
        return p
    preset = PRESET_DIR / f"{name_or_path}.yaml"
    if preset.exists():
        return preset
    return p


def _cmd_run(args) -> int:
    try:
        cfg = load_config(resolve_config_path(args.config))
        seeds = parse_seeds(args.seeds) if args.seeds else None
        if args.horizon is not None and args.horizon < 1:
            raise ConfigError(["--horizon: must be at least 1"])
        if args.jobs < 1:
            raise ConfigError(["--jobs: must be at least 1"])
        cfg = cfg.with_overrides(seeds=seeds, horizon=args.horizon)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output or os.path.join(os.environ.get(OUTPUT_ROOT_ENV, "runs"), cfg.name)
    status = run_experiment(cfg, out, jobs=args.jobs)
    print(f"{'done' if status == EXIT_OK else 'FAILED'}: {out}")
    return status


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(resolve_config_path(args.config))
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}")
        return EXIT_CONFIG
    sys.stdout.write(dump_config(cfg))
    print(f"# ok: {len(cfg.policies)} policies x {len(cfg.seeds)} seeds, horizon {cfg.horizon}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(name)
        return EXIT_OK
    if not args.name:
        print("presets show needs a preset name", file=sys.stderr)
        return EXIT_CONFIG
    path = PRESET_DIR / f"{args.name}.yaml"
    if not path.exists():
        print(f"unknown preset {args.name!r}; available: {', '.join(preset_names())}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(path.read_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robos", description="Robust satisficing Bayesian optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep")
    run.add_argument("config", help="YAML config path or preset name")
    run.add_argument("--seeds", help="inclusive seed range a..b (overrides the config)")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<name> or runs/<name>)")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    run.add_argument("--horizon", type=int, help="override the number of rounds")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config and print it with defaults filled in")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)

    pre = sub.add_parser("presets", help="list or show bundled presets")
    pre.add_argument("action", choices=("list", "show"))
    pre.add_argument("name", nargs="?")
    pre.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
