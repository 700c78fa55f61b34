"""Command line entry point: qldlab {heatmap|boundary|sato|theory|validate-config}."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .config import ExperimentConfig, config_from_dict, config_hash, load_config


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="TOML or JSON config file")
    sub.add_argument("--seed", type=int, help="master seed (overrides config)")
    sub.add_argument("--threads", type=int, help=f"worker count (default ${harness.ENV_THREADS} or 1)")
    sub.add_argument("--out", help="output directory (overrides config)")
    sub.add_argument("--preset", choices=["desk", "paper"], help="scale preset")


def _load(args, kind: str) -> ExperimentConfig:
    overrides = {"master_seed": args.seed, "out_dir": args.out}
    if args.config:
        cfg = load_config(args.config, preset=args.preset, overrides=overrides)
    else:
        cfg = config_from_dict({"kind": kind}, preset=args.preset, overrides=overrides)
    if cfg.kind != kind and not (kind.startswith("sato") and cfg.kind.startswith("sato")):
        raise SystemExit(f"config kind {cfg.kind!r} does not match subcommand {kind!r}")
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qldlab", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("heatmap", "boundary", "sato", "theory", "validate-config"):
        _common(subs.add_parser(name))
    args = parser.parse_args(argv)

    if args.command == "validate-config":
        if not args.config:
            raise SystemExit("validate-config needs --config")
        cfg = load_config(args.config, preset=args.preset,
                          overrides={"master_seed": args.seed, "out_dir": args.out})
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        print(f"config_hash: {config_hash(cfg)}", file=sys.stderr)
        return 0

    if args.command == "heatmap":
        cfg = _load(args, "heatmap")
        cells = harness.run_heatmap(cfg, threads=args.threads)
        path = harness.write_heatmap(cfg, cells, cfg.out_dir)
    elif args.command == "boundary":
        cfg = _load(args, "boundary_sweep")
        curves = harness.run_boundary_sweep(cfg, threads=args.threads)
        path = harness.write_boundary(cfg, curves, cfg.out_dir)
    elif args.command == "sato":
        cfg = _load(args, "sato_trajectories")
        runs = harness.run_sato(cfg, threads=args.threads)
        path = harness.write_sato(cfg, runs, cfg.out_dir)[0]
    else:
        cfg = _load(args, "theory_boundary")
        curves, failures = harness.run_theory_boundary(cfg)
        path = harness.write_theory(cfg, curves, failures, cfg.out_dir)
        for failure in failures:
            print(f"bracket failure: {failure}", file=sys.stderr)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
