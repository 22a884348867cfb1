"""Command-line driver.

Usage:

    asymflow <subcommand> [--config cfg.json] [--key value ...] --out DIR --seed N

Every config key has a default, can be set in the JSON config file,
and can be overridden on the command line (values are parsed as JSON
when possible, so lists and numbers work: ``--ranks "[0,4]"``). The
resolved config is written next to the outputs as ``config.json``.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import COMMANDS, default_config, run_command

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymflow",
        description="Asymmetric flow experiments: subspace fitting, training, "
        "sampling, coupling verification, and ablation sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="JSON config file (flat keys)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="experiment seed")
    return parser


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _parse_overrides(extra: list[str]) -> dict:
    overrides = {}
    i = 0
    while i < len(extra):
        key = extra[i]
        if not key.startswith("--"):
            raise SystemExit(f"unexpected argument {key!r} (expected --key value)")
        if i + 1 >= len(extra):
            raise SystemExit(f"missing value for {key!r}")
        overrides[key[2:].replace("-", "_")] = _parse_value(extra[i + 1])
        i += 2
    return overrides


def resolve_config(command: str, config_path: str | None, overrides: dict, seed) -> dict:
    cfg = default_config(command)
    if config_path:
        with open(config_path) as fh:
            file_cfg = json.load(fh)
        for key, value in file_cfg.items():
            if key not in cfg:
                raise SystemExit(f"unknown config key {key!r} for {command}")
            cfg[key] = value
    for key, value in overrides.items():
        if key not in cfg:
            raise SystemExit(f"unknown config key {key!r} for {command}")
        cfg[key] = value
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    overrides = _parse_overrides(extra)
    cfg = resolve_config(args.command, args.config, overrides, args.seed)
    out = run_command(args.command, cfg, args.out)
    print(f"{args.command}: wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
