"""Command line entry point: ``qewo run|sweep|plot|selftest``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import warnings
from pathlib import Path

from . import report, selftest
from .experiments import (
    EXPERIMENTS,
    apply_overrides,
    default_spec,
    load_overrides,
    parse_resolution_range,
    run_experiment,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qewo", description="Grover-driven weight search for small MLPs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, help="master seed (default 42)")
        sp.add_argument("--runs", type=int, help="runs per configuration")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--noise", action="store_true",
                        help="enable depolarizing noise (p1=0.005, p2=0.02)")
        sp.add_argument("--subsample", type=int, help="stratified row cap on the dataset")
        sp.add_argument("--out", type=Path, default=Path("results"), help="output root")
        sp.add_argument("--config", type=Path, help="key=value or JSON overrides")
        sp.add_argument("--no-plots", action="store_true")

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", help="|".join(EXPERIMENTS))
    common(run)

    sweep = sub.add_parser("sweep", help="resolution sweep on digits (exp2 without comparisons)")
    sweep.add_argument("--resolution", required=True, help="range A..B, e.g. 17..32")
    common(sweep)

    plot = sub.add_parser("plot", help="render SVG figures for every CSV in a directory")
    plot.add_argument("directory", type=Path)

    sub.add_parser("selftest", help="run the invariant suite")
    return p


def _spec_from_args(args, exp_id, **fixed):
    spec = default_spec(exp_id)
    if args.config is not None:
        spec = apply_overrides(spec, load_overrides(args.config))
    changes = dict(fixed)
    for name in ("seed", "runs", "epochs", "subsample"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.noise:
        changes["noise"] = True
    return dataclasses.replace(spec, **changes)


def _finish(spec, out_dir, args):
    files = run_experiment(spec, out_dir)
    for f in files:
        print(f)
    if not args.no_plots:
        for f in report.emit_plots(files, out_dir):
            print(f)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command == "run":
            if args.experiment not in EXPERIMENTS:
                parser.print_usage(sys.stderr)
                print(f"qewo: error: unknown experiment {args.experiment!r}; "
                      f"choose from {', '.join(EXPERIMENTS)}", file=sys.stderr)
                return 2
            spec = _spec_from_args(args, args.experiment)
            return _finish(spec, args.out / spec.id, args)
        if args.command == "sweep":
            try:
                res = parse_resolution_range(args.resolution)
            except ValueError as exc:
                print(f"qewo: error: {exc}", file=sys.stderr)
                return 2
            spec = _spec_from_args(args, "exp2", resolutions=res, compare_runs=0)
            return _finish(spec, args.out / "sweep", args)
        if args.command == "plot":
            if not args.directory.is_dir():
                print(f"qewo: error: {args.directory} is not a directory", file=sys.stderr)
                return 1
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                written = report.emit_plots(sorted(args.directory.glob("*.csv")), args.directory)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            for f in written:
                print(f)
            return 0
        if args.command == "selftest":
            results = selftest.run(echo=print)
            failed = [c for c in results if not c.ok]
            print(f"{len(results) - len(failed)}/{len(results)} checks passed")
            return 1 if failed else 0
    except FileNotFoundError as exc:
        print(f"qewo: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"qewo: error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
