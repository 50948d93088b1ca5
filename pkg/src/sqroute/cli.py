"""Command line: ``sqroute <experiment> [--config FILE] [overrides]`` or ``sqroute run FILE``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, ConfigError, apply_overrides, default_config, load_config


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqroute", description="Priority-class vehicle routing experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--runs", type=int, help="runs per sweep point")
        p.add_argument("--iterations", type=int, help="iterations per run (window keeps its share)")
        p.add_argument("--scale", type=float, help="multiply runs and iterations")
        p.add_argument("--out-dir")
        p.add_argument("--workers", type=int)
        p.add_argument("--paper-scale", action="store_true", help="use the published run protocol")
        p.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run the experiment named in a config file")
    run.add_argument("config")
    common(run)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config")
        common(p)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .experiments import run_experiment

    try:
        if args.command == "run":
            cfg = load_config(args.config)
        elif args.config:
            cfg = load_config(args.config, experiment=args.command)
        else:
            cfg = default_config(args.command)
        cfg = apply_overrides(cfg, seed=args.seed, runs=args.runs, iterations=args.iterations,
                              out_dir=args.out_dir, paper_scale=args.paper_scale, scale=args.scale,
                              workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2

    try:
        tables, paths = run_experiment(cfg)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for t in tables:
        print(f"[{t.name}]")
        print(",".join(t.columns))
        for row in t.rows:
            print(",".join(f"{x:.6g}" if isinstance(x, float) else str(x) for x in row))
    for p in paths:
        print(f"wrote {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
