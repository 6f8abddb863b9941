"""Online update rules: SGD, COMID, I-SGD, PA and the fully implicit step.

Every rule is an argmin of (some part of) the loss and the penalty plus
||w - w_t||^2 / (2 eta_t); they differ only in which parts are linearized
at w_t:

    sgd    loss and penalty linearized
    comid  loss linearized, penalty exact (proximal step)
    isgd   loss exact, penalty linearized
    pa     loss exact, penalty ignored
    fiol   loss and penalty exact
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import dual_prox, losses
from .core import ConfigurationError, Example, NumericError, StepSchedule, eta_at
from .evaluation import delta_t
from .penalties import Penalty, penalty_prox, penalty_subgrad, penalty_value

ALGOS = ("sgd", "comid", "isgd", "pa", "fiol")
SOLVERS = ("sort", "partition", "bisection", "closed_form")
IMPLICIT = ("isgd", "pa", "fiol")


@dataclass(frozen=True)
class LearnerConfig:
    algo: str = "fiol"
    loss: str = "squared"
    penalty: Penalty = field(default_factory=Penalty)
    schedule: StepSchedule = field(default_factory=StepSchedule)
    solver: str = "sort"
    seed: int = 0
    epsilon: float = 1e-10

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigurationError(f"unknown algorithm {self.algo!r}")
        if self.loss not in losses.LOSSES:
            raise ConfigurationError(f"unknown loss {self.loss!r}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.solver == "closed_form" and self.algo in IMPLICIT:
            if self.loss != "squared":
                raise ConfigurationError("closed_form solver needs the squared loss")
            if self.algo == "fiol" and self.penalty.kind == "l1" and self.penalty.lam > 0:
                raise ConfigurationError("fiol with an l1 penalty needs sort, partition or bisection")


@dataclass
class LearnerState:
    w: np.ndarray
    t: int = 1
    rng: np.random.Generator | None = None
    diverged: bool = False


@dataclass(frozen=True)
class StepStats:
    inst_loss: float
    delta_t: float
    beta: float
    eta: float
    elapsed_ns: int
    diverged: bool = False


def init_state(cfg: LearnerConfig, d: int, w1=None) -> LearnerState:
    w = np.zeros(d) if w1 is None else np.array(w1, dtype=float)
    if w.shape != (d,):
        raise ConfigurationError(f"initial weights must have length {d}")
    return LearnerState(w=w, t=1, rng=np.random.default_rng(cfg.seed))


def _implicit_loss_step(cfg, x, y, anchor, eta, rng):
    """argmin_w phi(x^T w) + ||w - anchor||^2 / (2 eta); returns (w, beta)."""
    if cfg.solver == "closed_form":
        beta = (y - float(x @ anchor)) / (1.0 + eta * float(x @ x))
        return anchor + eta * beta * x, beta
    sub = dual_prox.Subproblem(x, anchor, eta, 0.0, cfg.loss, y)
    sol, w = dual_prox.solve(sub, cfg.solver, rng, cfg.epsilon)
    return w, sol.beta


def _fiol_step(cfg, x, y, w, eta, rng):
    pen = cfg.penalty
    if pen.kind == "l2" and pen.lam > 0:
        if cfg.solver == "closed_form":
            return dual_prox.ridge_closed_form(x, y, w, eta, pen.lam), math.nan
        # lam/2 |v|^2 + |v - w|^2/(2 eta) = c/(2 eta) |v - w/c|^2 + const, c = 1 + eta*lam
        c = 1.0 + eta * pen.lam
        return _implicit_loss_step(cfg, x, y, w / c, eta / c, rng)
    if pen.kind == "l1" and pen.lam > 0:
        sub = dual_prox.Subproblem(x, w, eta, pen.lam, cfg.loss, y)
        sol, w_new = dual_prox.solve(sub, cfg.solver, rng, cfg.epsilon)
        return w_new, sol.beta
    return _implicit_loss_step(cfg, x, y, w, eta, rng)


def step(cfg: LearnerConfig, state: LearnerState, ex: Example) -> tuple[LearnerState, StepStats]:
    """Play w_t on example t and move to w_{t+1}.

    The state is updated in place and also returned.  A non-finite iterate or
    loss, or a subproblem that overflows, marks the state diverged and leaves
    w_t untouched.
    """
    if state.diverged:
        raise ConfigurationError("cannot step a diverged learner")
    w = state.w
    x = ex.dense(w.shape[0])
    y = ex.label
    eta = eta_at(cfg.schedule, state.t)
    start = time.perf_counter_ns()
    try:
        inst, w_new, beta = _apply(cfg, state, x, y, w, eta)
        ok = math.isfinite(inst) and bool(np.all(np.isfinite(w_new)))
    except (OverflowError, NumericError):
        # an update that overflows or cannot be solved in floating point
        inst, beta, ok = math.inf, math.nan, False
    elapsed = time.perf_counter_ns() - start
    if not ok:
        state.diverged = True
        return state, StepStats(inst, 0.0, beta, eta, elapsed, diverged=True)

    gap = delta_t(cfg.loss, cfg.penalty, w, w_new, ex) if cfg.algo == "fiol" else 0.0
    state.w = w_new
    state.t += 1
    return state, StepStats(inst, gap, beta, eta, elapsed)


def _apply(cfg, state, x, y, w, eta):
    beta = math.nan
    with np.errstate(over="ignore", invalid="ignore"):
        z = float(x @ w)
        inst = losses.loss_value(cfg.loss, z, y) + penalty_value(cfg.penalty, w)
        algo = cfg.algo
        if algo == "sgd":
            g = losses.loss_deriv(cfg.loss, z, y) * x + penalty_subgrad(cfg.penalty, w)
            w_new = w - eta * g
        elif algo == "comid":
            w_new = penalty_prox(cfg.penalty, w - eta * losses.loss_deriv(cfg.loss, z, y) * x, eta)
        elif algo == "isgd":
            anchor = w - eta * penalty_subgrad(cfg.penalty, w)
            w_new, beta = _implicit_loss_step(cfg, x, y, anchor, eta, state.rng)
        elif algo == "pa":
            w_new, beta = _implicit_loss_step(cfg, x, y, w, eta, state.rng)
        else:
            w_new, beta = _fiol_step(cfg, x, y, w, eta, state.rng)
    return inst, w_new, beta


class Learner:
    """Convenience wrapper owning a config and its state."""

    def __init__(self, cfg: LearnerConfig, d: int, w1=None):
        self.cfg = cfg
        self.state = init_state(cfg, d, w1)

    @property
    def w(self) -> np.ndarray:
        return self.state.w

    @property
    def diverged(self) -> bool:
        return self.state.diverged

    def step(self, ex: Example) -> StepStats:
        _, stats = step(self.cfg, self.state, ex)
        return stats
