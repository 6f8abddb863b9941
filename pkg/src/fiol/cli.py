"""Command-line entry point.

A fixed ``--eta`` runs one learner and writes steps.csv and summary.csv; an
``--eta-grid`` sweeps every (algo, eta) cell and writes sweep.csv and best.csv.
Exit codes: 0 on success (diverged runs included), 1 on IO or data errors,
2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .core import SCHEDULES, ConfigurationError, ParseError
from .datastream import read_sparse_text
from .learners import ALGOS, SOLVERS
from .losses import LOSSES
from .penalties import PENALTIES


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fiol", description="Online learning benchmark: single runs and step-size sweeps.")
    p.add_argument("--algo", default=None,
                   help=f"one of {', '.join(ALGOS)}; in sweep mode a comma list, where "
                        "fiol-partition style labels pick the solver "
                        f"(default {','.join(bench.DEFAULT_SWEEP_ALGOS)})")
    p.add_argument("--solver", choices=SOLVERS, default="sort")
    p.add_argument("--loss", choices=LOSSES, default="squared")
    p.add_argument("--penalty", choices=PENALTIES, default="l1")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--schedule", choices=SCHEDULES, default="constant")
    step = p.add_mutually_exclusive_group()
    step.add_argument("--eta", type=float, help="step scale for a single run")
    step.add_argument("--eta-grid", help="sweep grid: LO..HI in powers of ten, or a comma list")
    p.add_argument("--sigma", type=float, help="strong convexity for the inv_sigma_t schedule")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--d", type=int, default=1000)
    p.add_argument("--tau", type=float, default=0.2)
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--T", type=int, help="number of steps (default 10000)")
    budget.add_argument("--wall-ms", type=int, help="wall-time budget per run in milliseconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", help="sparse text dataset; replaces the synthetic stream")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--regret", action=argparse.BooleanOptionalAction, default=None,
                   help="compute regret against the offline comparator "
                        "(default on for single runs, off for sweeps)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sweep = args.eta_grid is not None
    T = args.T if args.T is not None or args.wall_ms is not None else 10000
    try:
        data = None
        if args.data is not None:
            data = read_sparse_text(args.data)
            if not data:
                raise ParseError(f"{args.data}: no examples")
            if args.T is None and args.wall_ms is None:
                T = len(data)
        if sweep:
            algos = tuple(args.algo.split(",")) if args.algo else bench.DEFAULT_SWEEP_ALGOS
            for a in algos:
                bench.split_algo(a)
            first, _ = bench.split_algo(algos[0])
        else:
            first, solver = bench.split_algo(args.algo or "fiol")
            if solver:
                args.solver = solver
        cfg = bench.BenchConfig(
            algo=first, solver=args.solver, loss=args.loss, penalty=args.penalty, lam=args.lam,
            schedule=args.schedule, eta=args.eta,
            grid=bench.parse_grid(args.eta_grid) if sweep else None,
            sigma=args.sigma, rho=args.rho, d=args.d, tau=args.tau, T=T, wall_ms=args.wall_ms,
            seed=args.seed,
            with_regret=args.regret if args.regret is not None else not sweep)
        cfg.learner_config()
        if data is None:
            cfg.synthetic()
    except ConfigurationError as exc:
        parser.print_usage(sys.stderr)
        print(f"fiol: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ParseError) as exc:
        print(f"fiol: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out)
    try:
        if sweep:
            rows, best = bench.run_sweep(cfg, algos, data)
            bench.write_rows(out / "sweep.csv", bench.SUMMARY_HEADER, rows)
            bench.write_rows(out / "best.csv", bench.SUMMARY_HEADER, best)
        else:
            rec, row = bench.run_single(cfg, data)
            bench.write_steps(out / "steps.csv", rec)
            bench.write_rows(out / "summary.csv", bench.SUMMARY_HEADER, [row])
    except ConfigurationError as exc:
        print(f"fiol: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fiol: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
