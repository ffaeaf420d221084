"""Command-line front end: ``smq analyze|simulate|reproduce``.

Exit codes: 0 success, 1 a reproduction check failed, 2 configuration
error, 3 infeasible or unstable model, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import presets
from .config import ConfigError, load_config, parse_config, parse_sweep
from .errors import ModelError, NumericalError, Unstable, WrongTypeCount
from .reproduce import reproduction_checks
from .scenarios import TableWriter, run_scenario

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("analyze", "simulate"):
        s = sub.add_parser(name)
        src = s.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="scenario JSON file")
        src.add_argument("--example", type=int, choices=(1, 2, 3, 4))
        s.add_argument("--sweep", help="NAME=start:stop:step or NAME=v1,v2,...")
        s.add_argument("--out", help="output directory (default: the config's 'output')")
        s.add_argument("--format", choices=("csv", "tsv"))
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--departures", type=int, default=1_000_000)
        s.add_argument("--replications", type=int)
        s.add_argument("--dump-roots", action="store_true")
        s.add_argument("--jobs", type=int, default=1, help="sweep points evaluated concurrently")
    r = sub.add_parser("reproduce")
    r.add_argument("--out", default="reproduce")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _scenario(args):
    cfg = load_config(args.config) if args.config else parse_config(presets.example_config(args.example))
    if args.sweep:
        cfg.sweep = parse_sweep(args.sweep)
        if cfg.analysis not in ("sweep", "stationary"):
            cfg.analysis = "sweep"
    if args.format:
        cfg.format = args.format
    if args.out is None and args.example:
        args.out = f"out/{cfg.name}"
    return cfg


def _reproduce(out: str) -> int:
    checks = reproduction_checks()
    w = TableWriter(Path(out))
    w.table("reproduce", ["check", "computed", "expected", "tolerance", "passed", "note"],
            [(c.name, c.computed, c.expected, c.tolerance, "pass" if c.passed else "FAIL", c.note)
             for c in checks])
    w.manifest({"examples": [1, 2, 3, 4]}, "reproduce")
    width = max(len(c.name) for c in checks)
    print(f"{'check':<{width}}  {'computed':>14}  {'expected':>14}  {'tolerance':>10}  result")
    for c in checks:
        print(f"{c.name:<{width}}  {c.computed:>14.8g}  {c.expected:>14.8g}  {c.tolerance:>10.3g}  "
              f"{'pass' if c.passed else 'FAIL'}  {c.note}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "reproduce":
            return _reproduce(args.out)
        cfg = _scenario(args)
        w = run_scenario(cfg, command=args.command, out=args.out, seed=args.seed,
                         departures=args.departures, replications=args.replications,
                         dump_roots=args.dump_roots, jobs=args.jobs)
        for name in sorted(w.files):
            print(w.out / name)
        return EXIT_OK
    except ConfigError as exc:
        print(f"smq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, Unstable, WrongTypeCount) as exc:
        print(f"smq: infeasible model ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"smq: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
