"""Exact solver for the fully implicit step

    min_w  phi(x^T w) + lam*||w||_1 + ||w - w_hat||^2 / (2 eta)

through its one-dimensional dual  min_beta  phi*(-beta) + l*(beta x), where
l(w) = lam*||w||_1 + ||w - w_hat||^2 / (2 eta).  The dual derivative is

    phi'(beta) = d/dbeta phi*(-beta) + g(beta),

with g piecewise linear.  Each coordinate with x_i != 0 contributes two kinks
u_i >= v_i; between consecutive kinks g is a line, so the root can be located
by sorting the kinks (O(d log d)) or by randomized partitioning (expected O(d))
and then solved on a single segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import losses
from .core import ConfigurationError, NumericError, as_weights, soft_threshold

SOLVERS = ("sort", "partition", "bisection")


@dataclass(frozen=True)
class Subproblem:
    x: np.ndarray
    w_hat: np.ndarray
    eta: float
    lam: float
    loss: str
    y: float

    def __post_init__(self):
        x = as_weights(self.x)
        w_hat = as_weights(self.w_hat, x.shape[0])
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive and finite, got {self.eta}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be nonnegative and finite, got {self.lam}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w_hat", w_hat)
        object.__setattr__(self, "y", losses.check_label(self.loss, self.y))

    def objective(self, w, l2: float = 0.0) -> float:
        w = np.asarray(w, dtype=float)
        diff = w - self.w_hat
        return (losses.loss_value(self.loss, float(self.x @ w), self.y)
                + self.lam * float(np.abs(w).sum())
                + 0.5 * l2 * float(w @ w)
                + float(diff @ diff) / (2.0 * self.eta))


@dataclass(frozen=True)
class BreakpointSet:
    """Kinks mu = [u; v] with slopes z = [x^2; -x^2] over the nonzero coordinates."""

    mu: np.ndarray
    z: np.ndarray
    p1: float
    q1: float
    zero_coords: np.ndarray
    nonzero_coords: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.nonzero_coords.shape[0]


@dataclass(frozen=True)
class DualSolution:
    beta: float
    segment_coeff_a: float
    segment_coeff_b: float
    solver: str
    iterations: int


def build_breakpoints(sub: Subproblem) -> BreakpointSet:
    x, eta, lam = sub.x, sub.eta, sub.lam
    nz = np.flatnonzero(x)
    xn = x[nz]
    wn = sub.w_hat[nz]
    shift = np.sign(xn) * lam * eta
    u = -(wn - shift) / (eta * xn)
    v = -(wn + shift) / (eta * xn)
    x2 = xn * xn
    return BreakpointSet(
        mu=np.concatenate([u, v]),
        z=np.concatenate([x2, -x2]),
        p1=float(x2.sum()),
        q1=float(x2 @ v),
        zero_coords=np.flatnonzero(x == 0),
        nonzero_coords=nz,
    )


def g_direct(sub: Subproblem, beta: float) -> float:
    """Derivative of l*(beta x) from its definition, summed over all coordinates."""
    a = sub.w_hat + sub.eta * beta * sub.x
    t = sub.lam * sub.eta
    return float(sub.x @ (np.maximum(a - t, 0.0) + np.minimum(a + t, 0.0)))


def g_breakpoints(bps: BreakpointSet, eta: float, beta: float) -> float:
    """The same derivative as a sum of hinge terms over the kinks plus a line."""
    return eta * float(bps.z @ np.maximum(beta - bps.mu, 0.0)) + eta * (bps.p1 * beta - bps.q1)


def varphi_prime(sub: Subproblem, bps: BreakpointSet, beta: float) -> float:
    return losses.conj_neg_deriv(sub.loss, beta, sub.y) + g_breakpoints(bps, sub.eta, beta)


def _extended_prime(sub: Subproblem, bps: BreakpointSet, beta: float) -> float:
    # off-domain points take the sign of the side they are on
    c = losses.extended_conj_neg_deriv(sub.loss, np.array([beta]), sub.y)[0]
    if math.isinf(c):
        return c
    return c + g_breakpoints(bps, sub.eta, beta)


def _segment_tests(sub: Subproblem, mu, p, q):
    """phi'(mu) for kinks mu on segments with cumulative line coefficients (p, q)."""
    return (losses.extended_conj_neg_deriv(sub.loss, mu, sub.y)
            + sub.eta * p * mu - sub.eta * q)


def _finish(sub: Subproblem, p: float, q: float, lo: float, hi: float,
            solver: str, iterations: int) -> DualSolution:
    a = sub.eta * max(p, 0.0)
    b = sub.eta * q
    beta = losses.solve_segment(sub.loss, a, b, sub.y)
    beta = min(max(beta, lo), hi)
    beta = losses.dual_domain(sub.loss, sub.y).clamp(beta)
    return DualSolution(float(beta), float(a), float(b), solver, iterations)


def solve_sort(sub: Subproblem, bps: BreakpointSet | None = None) -> DualSolution:
    if bps is None:
        bps = build_breakpoints(sub)
    if bps.mu.size == 0:
        return _finish(sub, 0.0, 0.0, -math.inf, math.inf, "sort", 0)
    order = np.argsort(bps.mu, kind="stable")
    mu = bps.mu[order]
    z = bps.z[order]
    # line coefficients of the segment that ends at mu[j]: sums over kinks before j
    cz = np.cumsum(z)
    czm = np.cumsum(z * mu)
    p = bps.p1 + np.concatenate(([0.0], cz[:-1]))
    q = bps.q1 + np.concatenate(([0.0], czm[:-1]))
    tests = _segment_tests(sub, mu, p, q)
    hits = np.flatnonzero(tests >= 0)
    if hits.size == 0:
        # past the last kink; sum(z) is exactly zero in exact arithmetic
        return _finish(sub, bps.p1 + cz[-1], bps.q1 + czm[-1], mu[-1], math.inf,
                       "sort", mu.size + 1)
    rho = int(hits[0])
    lo = mu[rho - 1] if rho > 0 else -math.inf
    return _finish(sub, p[rho], q[rho], lo, mu[rho], "sort", rho + 1)


def solve_partition(sub: Subproblem, rng: np.random.Generator,
                    bps: BreakpointSet | None = None) -> DualSolution:
    """Randomized-pivot search for the active segment, expected O(d).

    Keeps (p, q), the line coefficients accumulated from kinks known to lie
    left of the root, and shrinks the candidate set U around the root.  The
    final segment solve happens once U is empty.
    """
    if bps is None:
        bps = build_breakpoints(sub)
    mu, z = bps.mu, bps.z
    p, q = bps.p1, bps.q1
    lo, hi = -math.inf, math.inf
    rounds = 0
    while mu.size:
        k = int(rng.integers(mu.size))
        mk = mu[k]
        left = mu <= mk
        zl = z[left]
        dp = float(zl.sum())
        dq = float(zl @ mu[left])
        test = _segment_tests(sub, np.array([mk]), p + dp, q + dq)[0]
        if test < 0:
            p += dp
            q += dq
            lo = mk
            keep = ~left
        else:
            hi = mk
            keep = left
            keep[k] = False
        mu = mu[keep]
        z = z[keep]
        rounds += 1
    return _finish(sub, p, q, lo, hi, "partition", rounds)


def solve_bisection(sub: Subproblem, epsilon: float = 1e-10,
                    bps: BreakpointSet | None = None, max_iter: int = 10_000) -> DualSolution:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if bps is None:
        bps = build_breakpoints(sub)
    dom = losses.dual_domain(sub.loss, sub.y)
    center = dom.clamp(0.0)
    iters = 0

    def f(beta):
        val = _extended_prime(sub, bps, beta)
        if math.isnan(val) or (math.isinf(val) and dom.lo < beta < dom.hi):
            raise NumericError(f"non-finite dual derivative {val} at beta={beta}")
        return val

    def done(beta):
        return DualSolution(beta, math.nan, math.nan, "bisection", iters)

    # expand outwards from the clamped origin until the root is bracketed
    high, f_high, step = center, f(center), 1.0
    while f_high < 0:
        if high >= dom.hi:
            return done(dom.hi)
        high = min(center + step, dom.hi)
        f_high = f(high)
        step *= 2.0
        iters += 1
        if iters > max_iter:
            raise NumericError("bisection bracket expansion did not terminate")
    low, f_low, step = center, f(center), 1.0
    while f_low > 0:
        if low <= dom.lo:
            return done(dom.lo)
        low = max(center - step, dom.lo)
        f_low = f(low)
        step *= 2.0
        iters += 1
        if iters > max_iter:
            raise NumericError("bisection bracket expansion did not terminate")
    if f_high == 0:
        return done(high)
    if f_low == 0:
        return done(low)

    mid = 0.5 * (low + high)
    f_mid = f(mid)
    while abs(f_mid) >= epsilon:
        if f_mid > 0:
            high = mid
        else:
            low = mid
        new_mid = 0.5 * (low + high)
        iters += 1
        if new_mid == mid or new_mid in (low, high) or iters > max_iter:
            # interval exhausted at double precision (root sits on a jump)
            break
        mid = new_mid
        f_mid = f(mid)
    return done(mid)


def recover_primal(sub: Subproblem, beta: float) -> np.ndarray:
    return soft_threshold(sub.w_hat + sub.eta * beta * sub.x, sub.lam * sub.eta)


def solve(sub: Subproblem, solver: str = "sort", rng: np.random.Generator | None = None,
          epsilon: float = 1e-10) -> tuple[DualSolution, np.ndarray]:
    """Dispatch to a dual solver and map the dual solution back to weights."""
    if solver == "sort":
        sol = solve_sort(sub)
    elif solver == "partition":
        sol = solve_partition(sub, rng if rng is not None else np.random.default_rng())
    elif solver == "bisection":
        sol = solve_bisection(sub, epsilon)
    else:
        raise ConfigurationError(f"unknown dual solver {solver!r}")
    return sol, recover_primal(sub, sol.beta)


def ridge_closed_form(x, y: float, w_hat, eta: float, lambda2: float) -> np.ndarray:
    """Exact step for squared loss with (lambda2/2)||w||^2.

    Setting the gradient to zero gives (c I + eta x x^T) w = w_hat + eta y x
    with c = 1 + eta*lambda2; Sherman-Morrison then yields

        w = w_hat / c - eta (x^T w_hat - c y) / (c (c + eta ||x||^2)) x.
    """
    x = np.asarray(x, dtype=float)
    w_hat = np.asarray(w_hat, dtype=float)
    c = 1.0 + eta * lambda2
    coef = eta * (float(x @ w_hat) - c * y) / (c * (c + eta * float(x @ x)))
    return w_hat / c - coef * x


def prox_oracle(sub: Subproblem, tol: float = 1e-12, l2: float = 0.0,
                max_iter: int = 1_000_000) -> np.ndarray:
    """Primal reference solution, independent of the breakpoint machinery.

    Smooth losses: accelerated proximal gradient with backtracking and
    adaptive restart, stopped when the gradient-mapping norm is <= tol (or at
    the rounding floor of the iterate).  Hinge loss is not smooth, so the
    primal KKT conditions are split into the three cases margin > 1,
    margin < 1 and margin == 1, the last solved with Brent's method.

    ``l2`` adds (l2/2)||w||^2 to the objective so ridge steps can be checked.
    Test use only.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if sub.loss == "hinge":
        return _hinge_kkt(sub, tol, l2)
    return _fista(sub, tol, l2, max_iter)


def _hinge_kkt(sub: Subproblem, tol: float, l2: float) -> np.ndarray:
    x, y, eta, lam = sub.x, sub.y, sub.eta, sub.lam
    c = 1.0 + eta * l2

    def w_of(alpha):
        # minimiser of lam|w|_1 + l2/2|w|^2 + |w-w_hat|^2/(2 eta) - alpha*y*x^T w
        return soft_threshold(sub.w_hat + eta * alpha * y * x, lam * eta) / c

    def margin(alpha):
        return y * float(x @ w_of(alpha)) - 1.0

    if margin(0.0) >= 0:
        return w_of(0.0)
    if margin(1.0) <= 0:
        return w_of(1.0)
    alpha = brentq(margin, 0.0, 1.0, xtol=min(tol, 1e-15), rtol=4 * np.finfo(float).eps,
                   maxiter=500)
    return w_of(alpha)


def _fista(sub: Subproblem, tol: float, l2: float, max_iter: int) -> np.ndarray:
    x, w_hat, eta, lam, kind, y = sub.x, sub.w_hat, sub.eta, sub.lam, sub.loss, sub.y
    eps = np.finfo(float).eps

    def F(w):
        d = w - w_hat
        return (losses.loss_value(kind, float(x @ w), y) + 0.5 * l2 * float(w @ w)
                + float(d @ d) / (2 * eta))

    def grad(w):
        return losses.loss_deriv(kind, float(x @ w), y) * x + l2 * w + (w - w_hat) / eta

    L = 1.0 / eta + l2
    w = soft_threshold(w_hat, lam * eta)
    v = w.copy()
    t = 1.0
    for _ in range(max_iter):
        gv = grad(v)
        fv = F(v)
        while True:
            s = 1.0 / L
            w_new = soft_threshold(v - s * gv, lam * s)
            d = w_new - v
            bound = fv + float(gv @ d) + 0.5 * L * float(d @ d)
            if F(w_new) <= bound + 10 * eps * max(1.0, abs(fv)):
                break
            L *= 2.0
        resid = math.sqrt(float(d @ d)) * L
        floor = 64 * eps * (L * math.sqrt(float(v @ v)) + math.sqrt(float(gv @ gv)) + 1.0)
        if resid <= max(tol, floor):
            return w_new
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if float(d @ (w_new - w)) < 0:
            # momentum pointing uphill: restart
            t_new, v = 1.0, w_new.copy()
        else:
            v = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        L *= 0.95
    raise NumericError(f"prox oracle exceeded {max_iter} iterations (residual {resid:.3e})")
