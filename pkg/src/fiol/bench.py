"""Experiment driver: single runs and step-size sweeps with CSV output."""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import ConfigurationError, StepSchedule
from .datastream import SyntheticConfig, stream
from .evaluation import (RecordBuilder, RunRecord, batch_comparator,
                         progressive_objective, regret, sparsity_count)
from .learners import ALGOS, LearnerConfig, init_state, step
from .losses import CLASSIFICATION
from .penalties import Penalty

STEPS_HEADER = ["t", "eta", "inst_loss", "delta_t", "nonzeros", "elapsed_ns"]
SUMMARY_HEADER = ["algo", "solver", "eta_scale", "rho", "lambda", "T", "value", "regret",
                  "sum_delta", "sparsity", "diverged", "wall_ms"]
DEFAULT_SWEEP_ALGOS = ("sgd", "comid", "isgd", "fiol-sort", "fiol-partition")
DEFAULT_GRID = tuple(10.0 ** k for k in range(-10, 3))


@dataclass(frozen=True)
class BenchConfig:
    algo: str = "fiol"
    solver: str = "sort"
    loss: str = "squared"
    penalty: str = "l1"
    lam: float = 0.1
    schedule: str = "constant"
    eta: float | None = None
    grid: tuple | None = None
    sigma: float | None = None
    rho: float = 0.0
    d: int = 1000
    tau: float = 0.2
    T: int | None = 10000
    wall_ms: int | None = None
    seed: int = 0
    with_regret: bool = False

    def __post_init__(self):
        if self.schedule == "inv_sigma_t":
            if self.eta is not None or self.grid is not None:
                raise ConfigurationError("inv_sigma_t takes --sigma, not a step scale")
            if self.sigma is None:
                raise ConfigurationError("inv_sigma_t needs --sigma")
        elif (self.eta is None) == (self.grid is None):
            raise ConfigurationError("give exactly one of a step scale and a sweep grid")
        if self.grid is not None and len(self.grid) == 0:
            raise ConfigurationError("sweep grid is empty")
        if (self.T is None) == (self.wall_ms is None):
            raise ConfigurationError("give exactly one of a step count and a wall-time budget")
        if self.T is not None and self.T < 1:
            raise ConfigurationError(f"step count must be at least 1, got {self.T}")
        if self.wall_ms is not None and self.wall_ms <= 0:
            raise ConfigurationError(f"wall-time budget must be positive, got {self.wall_ms}")
        if self.schedule == "inv_sqrt_T" and self.T is None:
            raise ConfigurationError("inv_sqrt_T needs a fixed step count")

    @property
    def eta_scale(self) -> float:
        if self.schedule == "inv_sigma_t":
            return 1.0 / self.sigma
        return self.eta

    def learner_config(self) -> LearnerConfig:
        sched = StepSchedule(self.schedule, c=self.eta if self.eta is not None else 1.0,
                             sigma=self.sigma, horizon=self.T)
        pen = Penalty(self.penalty, self.lam if self.penalty != "none" else 0.0)
        return LearnerConfig(algo=self.algo, loss=self.loss, penalty=pen, schedule=sched,
                             solver=self.solver, seed=self.seed)

    def synthetic(self) -> SyntheticConfig:
        return SyntheticConfig(d=self.d, rho=self.rho, tau=self.tau, seed=self.seed)


def split_algo(label: str) -> tuple[str, str | None]:
    """'fiol-partition' -> ('fiol', 'partition'); 'sgd' -> ('sgd', None)."""
    algo, _, solver = label.partition("-")
    if algo not in ALGOS:
        raise ConfigurationError(f"unknown algorithm {label!r}")
    return algo, solver or None


def parse_grid(text: str) -> tuple:
    """'1e-10..1e2' -> (1e-10, 1e-9, ..., 1e2); a comma list is taken as is."""
    try:
        if ".." in text:
            lo, hi = (float(s) for s in text.split(".."))
            if not (lo > 0 and hi >= lo):
                raise ValueError
            a, b = round(math.log10(lo)), round(math.log10(hi))
            return tuple(10.0 ** k for k in range(a, b + 1))
        vals = tuple(float(s) for s in text.split(","))
        if not all(v > 0 for v in vals):
            raise ValueError
        return vals
    except ValueError:
        raise ConfigurationError(f"bad step grid {text!r}; expected LO..HI or a comma list") from None


def _examples(cfg: BenchConfig, data):
    if data is not None:
        return iter(data)
    src = stream(cfg.synthetic())
    if cfg.loss in CLASSIFICATION:
        # classification losses see the sign of the regression target
        return (type(ex)(ex.features, 1.0 if ex.label >= 0 else -1.0) for ex in src)
    return src


def run_single(cfg: BenchConfig, data=None) -> tuple[RunRecord, dict]:
    """Stream examples through one learner; returns the record and a summary row."""
    lcfg = cfg.learner_config()
    d = data[0].dim if data else cfg.d
    if data is not None and cfg.T is not None and cfg.T > len(data):
        raise ConfigurationError(f"--T {cfg.T} exceeds the {len(data)} examples in the data file")
    state = init_state(lcfg, d)
    builder = RecordBuilder()
    seen = []
    src = _examples(cfg, data)
    budget_ns = cfg.wall_ms * 1_000_000 if cfg.wall_ms is not None else None
    start = time.perf_counter_ns()
    n = 0
    while True:
        if cfg.T is not None and n >= cfg.T:
            break
        if budget_ns is not None and time.perf_counter_ns() - start >= budget_ns:
            break
        ex = next(src, None)
        if ex is None:
            break
        _, stats = step(lcfg, state, ex)
        builder.add(stats, state.w)
        if stats.diverged:
            break
        if cfg.with_regret:
            seen.append(ex)
        n += 1
    wall_ms = (time.perf_counter_ns() - start) / 1e6
    rec = builder.build(state.w)

    reg = math.nan
    if rec.diverged:
        reg = math.inf
    elif cfg.with_regret and rec.N:
        comp = batch_comparator(seen, lcfg.loss, lcfg.penalty, d=d)
        reg = regret(rec, seen, comp.w, lcfg.loss, lcfg.penalty, comp).R_T
    row = {
        "algo": cfg.algo, "solver": cfg.solver if cfg.algo in ("isgd", "pa", "fiol") else "",
        "eta_scale": cfg.eta_scale, "rho": cfg.rho, "lambda": lcfg.penalty.lam, "T": rec.N,
        "value": math.inf if rec.diverged or rec.N == 0 else progressive_objective(rec),
        "regret": reg, "sum_delta": float(np.sum(rec.delta_t)),
        "sparsity": sparsity_count(rec.w_final), "diverged": rec.diverged, "wall_ms": wall_ms,
    }
    return rec, row


def _cell(args):
    cfg, data = args
    return run_single(cfg, data)[1]


def sweep_cells(cfg: BenchConfig, algos=DEFAULT_SWEEP_ALGOS) -> list[BenchConfig]:
    """One config per (algo, eta) pair, seed = base seed + cell index."""
    if cfg.grid is None:
        raise ConfigurationError("a sweep needs a step grid")
    cells = []
    for label in algos:
        algo, solver = split_algo(label)
        for eta in cfg.grid:
            cells.append(replace(cfg, algo=algo, solver=solver or cfg.solver, eta=eta, grid=None,
                                 seed=cfg.seed + len(cells)))
    return cells


def worker_count() -> int:
    env = os.environ.get("FIOL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"FIOL_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("FIOL_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def run_sweep(cfg: BenchConfig, algos=DEFAULT_SWEEP_ALGOS, data=None,
              workers: int | None = None) -> tuple[list[dict], list[dict]]:
    """Run every cell; returns (all rows, best row per algo and solver)."""
    cells = sweep_cells(cfg, algos)
    workers = workers or worker_count()
    jobs = [(c, data) for c in cells]
    if workers <= 1 or len(cells) == 1:
        rows = [_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
            rows = list(pool.map(_cell, jobs))
    return rows, best_rows(rows)


def best_rows(rows: list[dict]) -> list[dict]:
    """Per (algo, solver), the non-diverged row of least value; ties go to the smaller step."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["algo"], r["solver"]), []).append(r)
    best = []
    for group in groups.values():
        ok = [r for r in group if not r["diverged"] and math.isfinite(r["value"])]
        if ok:
            best.append(min(ok, key=lambda r: (r["value"], r["eta_scale"])))
        else:
            best.append(dict(min(group, key=lambda r: r["eta_scale"]), diverged=True))
    return best


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_rows(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r[k]) for k in header])


def write_steps(path, rec: RunRecord) -> None:
    rows = ({"t": t, "eta": e, "inst_loss": l, "delta_t": dl, "nonzeros": nz, "elapsed_ns": ns}
            for t, e, l, dl, nz, ns in zip(rec.t, rec.eta, rec.inst_loss, rec.delta_t,
                                             rec.nonzeros, rec.elapsed_ns))
    write_rows(path, STEPS_HEADER, rows)
