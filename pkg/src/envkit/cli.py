"""envkit command line: run configs, built-in demos, and manage the Green cache."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import EnvkitError
from .experiments import SCENARIOS, ExperimentConfig, builtin_config, run_experiment
from .kg import _cache_dir


def _print_report(rep) -> None:
    for name, ok in rep.assertions.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
    print(f"{rep.scenario}: {'PASS' if rep.passed else 'FAIL'} ({rep.wall_clock:.2f}s)")


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or cfg.output_dir or Path(args.config).with_suffix("").name + "-out"
    rep = run_experiment(cfg, out, threads=args.threads)
    _print_report(rep)
    print(f"wrote {Path(out) / 'report.json'}")
    return 0 if rep.passed else 1


def cmd_demo(args) -> int:
    cfg = builtin_config(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or f"envkit-{args.scenario}"
    rep = run_experiment(cfg, out, threads=args.threads)
    _print_report(rep)
    print(f"wrote {Path(out) / 'report.json'}")
    return 0 if rep.passed else 1


def cmd_cache(args) -> int:
    d = _cache_dir()
    files = sorted(d.glob("green-*")) if d.exists() else []
    if args.action == "ls":
        total = 0
        for f in files:
            size = f.stat().st_size
            total += size
            print(f"{size:>12d}  {f.name}")
        print(f"{len(files)} files, {total} bytes in {d}")
    else:
        for f in files:
            f.unlink()
        print(f"removed {len(files)} files from {d}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="envkit", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config (TOML)")
    run.add_argument("config")
    run.add_argument("--out", help="output directory")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int)
    run.set_defaults(func=cmd_run)

    demo = sub.add_parser("demo", help="run a built-in scenario")
    demo.add_argument("scenario", choices=SCENARIOS)
    demo.add_argument("--out")
    demo.add_argument("--threads", type=int, default=1)
    demo.add_argument("--seed", type=int)
    demo.set_defaults(func=cmd_demo)

    cache = sub.add_parser("cache", help="inspect or clear the Green-matrix cache")
    cache.add_argument("action", choices=("ls", "clear"))
    cache.set_defaults(func=cmd_cache)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (EnvkitError, OSError) as exc:
        print(f"envkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
