"""Regret, one-step improvement, the offline comparator and run summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from . import losses
from .core import Example, NumericError
from .penalties import Penalty, penalty_bregman, penalty_prox, penalty_value


@dataclass
class RunRecord:
    """Per-step telemetry of one run plus its final state.

    Row i describes round t = i + 1: the step size used, the regularized loss
    of the iterate played before the update, delta_t, the nonzero count of the
    iterate after the update and the wall time of the update.
    """

    eta: np.ndarray
    inst_loss: np.ndarray
    delta_t: np.ndarray
    nonzeros: np.ndarray
    elapsed_ns: np.ndarray
    w_final: np.ndarray
    diverged: bool = False
    diverged_at: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return int(self.inst_loss.shape[0])

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    def head(self, n: int) -> "RunRecord":
        """The first n rounds; w_final is kept from the full run."""
        if not 0 <= n <= self.N:
            raise ValueError(f"cannot take {n} of {self.N} rounds")
        return RunRecord(self.eta[:n], self.inst_loss[:n], self.delta_t[:n], self.nonzeros[:n],
                         self.elapsed_ns[:n], self.w_final, self.diverged, self.diverged_at,
                         dict(self.meta))


class RecordBuilder:
    """Accumulates StepStats into a RunRecord."""

    def __init__(self):
        self._rows = []
        self.diverged_at = None

    def add(self, stats, w_after) -> None:
        if stats.diverged:
            self.diverged_at = len(self._rows) + 1
            return
        self._rows.append((stats.eta, stats.inst_loss, stats.delta_t,
                           int(np.count_nonzero(w_after)), stats.elapsed_ns))

    def build(self, w_final, **meta) -> RunRecord:
        if self._rows:
            eta, inst, delta, nnz, ns = (np.array(c) for c in zip(*self._rows))
        else:
            eta = inst = delta = np.zeros(0)
            nnz = ns = np.zeros(0, dtype=np.int64)
        return RunRecord(eta=eta.astype(float), inst_loss=inst.astype(float),
                         delta_t=delta.astype(float), nonzeros=nnz.astype(np.int64),
                         elapsed_ns=ns.astype(np.int64), w_final=np.array(w_final, dtype=float),
                         diverged=self.diverged_at is not None, diverged_at=self.diverged_at,
                         meta=meta)


@dataclass(frozen=True)
class RegretReport:
    R_T: float
    comparator_objective: float
    comparator_residual: float
    per_T_curve: list
    sum_delta: float = 0.0


@dataclass(frozen=True)
class ComparatorResult:
    w: np.ndarray
    objective: float
    residual: float
    converged: bool
    iterations: int


def delta_t(loss: str, penalty: Penalty, w_t, w_next, ex: Example) -> float:
    """Linearization gap of f_t + r at w_t, evaluated at w_next.

    Uses the same subgradients as the explicit learners (hinge kink and l1 at
    zero both map to 0).  Loss and penalty parts are computed as separate
    Bregman terms, each of which is nonnegative by construction.
    """
    w_t = np.asarray(w_t, dtype=float)
    w_next = np.asarray(w_next, dtype=float)
    x = ex.dense(w_t.shape[0])
    z, z_new = float(x @ w_t), float(x @ w_next)
    return losses.loss_bregman(loss, z, z_new, ex.label) + penalty_bregman(penalty, w_t, w_next)


def stack(dataset, d: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Dense design matrix and label vector of an example sequence."""
    dataset = list(dataset)
    if d is None:
        d = max((ex.dim for ex in dataset), default=0)
    X = np.zeros((len(dataset), d))
    for i, ex in enumerate(dataset):
        X[i] = ex.dense(d)
    y = np.array([ex.label for ex in dataset], dtype=float)
    return X, y


def batch_objective(X, y, w, loss: str, penalty: Penalty) -> float:
    return float(np.mean(losses.batch_loss(loss, X @ w, y))) + penalty_value(penalty, w)


def batch_comparator(dataset, loss: str, penalty: Penalty, tol: float = 1e-10,
                     max_iters: int = 10**6, d: int | None = None) -> ComparatorResult:
    """argmin_w (1/T) sum_t f_t(w) + r(w).

    Smooth losses use accelerated proximal gradient with backtracking and
    adaptive restart, stopping when the gradient-mapping norm
    L*||w - prox(w - grad/L)|| drops below tol.  The hinge loss is not
    smooth; it is solved as a linear program (no penalty or l1) or through
    its box-constrained dual (l2), and the residual is the duality gap.
    """
    X, y = stack(dataset, d)
    T = X.shape[0]
    if T == 0:
        raise ValueError("comparator needs at least one example")
    if loss == "hinge":
        losses._check_labels(loss, y)
        if penalty.l2 > 0:
            return _hinge_l2(X, y, penalty, tol, max_iters)
        return _hinge_lp(X, y, penalty, tol)
    eps = np.finfo(float).eps

    def f(w):
        return float(np.mean(losses.batch_loss(loss, X @ w, y)))

    def grad(w):
        return X.T @ losses.batch_deriv(loss, X @ w, y) / T

    def F(w):
        return f(w) + penalty_value(penalty, w)

    w = np.zeros(X.shape[1])
    v = w.copy()
    best, best_F, best_res = w.copy(), F(w), math.inf
    # squared loss has an explicit Lipschitz constant; elsewhere start small
    L = max(float(np.linalg.norm(X, 2)) ** 2 / T, 1e-12) if loss == "squared" else 1.0
    t = 1.0
    for it in range(1, max_iters + 1):
        fv, gv = f(v), grad(v)
        while True:
            w_new = penalty_prox(penalty, v - gv / L, 1.0 / L)
            dv = w_new - v
            if f(w_new) <= fv + float(gv @ dv) + 0.5 * L * float(dv @ dv) + 10 * eps * max(1.0, abs(fv)):
                break
            L *= 2.0
        # gradient mapping at v: the distance prox moved, scaled by L
        res = L * math.sqrt(float(dv @ dv))
        F_new = F(w_new)
        if F_new < best_F or (F_new == best_F and res < best_res):
            best, best_F, best_res = w_new.copy(), F_new, res
        if res <= tol:
            return ComparatorResult(w_new, F_new, res, True, it)
        if not math.isfinite(F_new):
            raise NumericError("comparator iterate became non-finite")
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if float(dv @ (w_new - w)) < 0:
            t_new, v = 1.0, w_new.copy()
        else:
            v = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        L *= 0.95
    return ComparatorResult(best, best_F, best_res, False, max_iters)


def _hinge_lp(X, y, penalty: Penalty, tol: float) -> ComparatorResult:
    # variables [w+, w-, xi] >= 0; xi_t >= 1 - y_t x_t^T (w+ - w-)
    T, d = X.shape
    yX = y[:, None] * X
    c = np.concatenate([np.full(2 * d, penalty.l1), np.full(T, 1.0 / T)])
    A = sparse.hstack([sparse.csr_matrix(-yX), sparse.csr_matrix(yX), -sparse.identity(T)],
                      format="csr")
    b = -np.ones(T)
    res = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"hinge comparator LP failed: {res.message}")
    w = res.x[:d] - res.x[d:2 * d]
    obj = batch_objective(X, y, w, "hinge", penalty)
    gap = abs(obj - float(res.ineqlin.marginals @ b))
    return ComparatorResult(w, obj, gap, gap <= tol, int(res.nit))


def _hinge_l2(X, y, penalty: Penalty, tol: float, max_iters: int) -> ComparatorResult:
    # dual: max_a (1/T) sum a - ||X^T (y*a)||^2 / (2 lam T^2), a in [0, 1]^T,
    # with w = X^T (y*a) / (lam T)
    T = X.shape[0]
    lam = penalty.l2
    yX = y[:, None] * X

    def neg_dual(a):
        v = yX.T @ a
        return float(v @ v) / (2 * lam * T * T) - a.sum() / T, yX @ v / (lam * T * T) - 1.0 / T

    res = minimize(neg_dual, np.full(T, 0.5), jac=True, method="L-BFGS-B", bounds=[(0, 1)] * T,
                   options=dict(maxiter=max_iters, ftol=0.0, gtol=1e-15))
    a = np.clip(res.x, 0.0, 1.0)
    v = yX.T @ a
    sq = np.einsum("ij,ij->i", yX, yX)
    iters = int(res.nit)

    def gap_of(v, a):
        w = v / (lam * T)
        obj = batch_objective(X, y, w, "hinge", penalty)
        return w, obj, max(obj - (a.sum() / T - float(v @ v) / (2 * lam * T * T)), 0.0)

    w, obj, gap = gap_of(v, a)
    # polish with exact coordinate steps on the dual until the gap closes
    while gap > tol and iters < max_iters:
        for t in range(T):
            if sq[t] == 0.0:
                continue
            g = float(yX[t] @ v) / (lam * T) - 1.0
            new = min(max(a[t] - g * lam * T / sq[t], 0.0), 1.0)
            if new != a[t]:
                v += (new - a[t]) * yX[t]
                a[t] = new
        iters += 1
        prev = gap
        w, obj, gap = gap_of(v, a)
        if gap >= prev:
            break
    return ComparatorResult(w, obj, gap, gap <= tol, iters)


def _per_step_losses(dataset, w, loss: str, penalty: Penalty) -> np.ndarray:
    # same scalar path as the learners, so replaying w gives bit-identical values
    w = np.asarray(w, dtype=float)
    r = penalty_value(penalty, w)
    return np.array([losses.loss_value(loss, float(ex.dense(w.shape[0]) @ w), ex.label) + r
                     for ex in dataset])


def replay(dataset, w, loss: str, penalty: Penalty) -> RunRecord:
    """Record of a learner that plays the fixed vector w on every round."""
    w = np.asarray(w, dtype=float)
    inst = _per_step_losses(dataset, w, loss, penalty)
    n = inst.shape[0]
    return RunRecord(eta=np.zeros(n), inst_loss=inst, delta_t=np.zeros(n),
                     nonzeros=np.full(n, np.count_nonzero(w), dtype=np.int64),
                     elapsed_ns=np.zeros(n, dtype=np.int64), w_final=w.copy())


def regret(record: RunRecord, dataset, w_star, loss: str, penalty: Penalty,
           comparator: ComparatorResult | None = None) -> RegretReport:
    """R_T = sum_t [f_t(w_t) + r(w_t)] - sum_t [f_t(w*) + r(w*)].

    per_T_curve holds (t, R_t) at powers of two up to N, and N itself.
    A diverged run has infinite regret.
    """
    dataset = list(dataset)
    resid = comparator.residual if comparator is not None else math.nan
    if record.diverged:
        return RegretReport(math.inf, math.nan, resid, [], float(np.sum(record.delta_t)))
    if len(dataset) != record.N:
        raise ValueError(f"record has {record.N} steps but the dataset has {len(dataset)}")
    ref = _per_step_losses(dataset, w_star, loss, penalty)
    diff = np.cumsum(record.inst_loss - ref)
    ts = [1 << k for k in range(record.N.bit_length()) if (1 << k) <= record.N]
    if record.N and ts[-1] != record.N:
        ts.append(record.N)
    curve = [(t, float(diff[t - 1])) for t in ts]
    R = float(np.sum(record.inst_loss) - np.sum(ref)) if record.N else 0.0
    obj = float(np.mean(ref)) if record.N else math.nan
    return RegretReport(R, obj, resid, curve, float(np.sum(record.delta_t)))


def progressive_objective(record: RunRecord) -> float:
    """Average regularized loss of the iterates actually played."""
    if record.N == 0:
        raise ValueError("empty run record")
    return float(np.mean(record.inst_loss))


def sparsity_count(w) -> int:
    """Number of entries exactly equal to zero."""
    return int(np.count_nonzero(np.asarray(w) == 0.0))
