"""Scalar losses phi(z; y), their conjugates on the dual line, and segment solves.

Duality convention: ``phi(z) = sup_beta { -beta*z - phi*(-beta) }``, so the
dual variable at the optimum is ``beta = -phi'(z)``.  Everything below is in
terms of ``c(beta) = phi*(-beta)`` and its derivative.

For the margin losses (hinge, logistic, exponential) ``phi(z) = h(y z)`` with
``y in {-1, +1}``, hence ``phi*(s) = h*(y s)`` and the y = -1 case is the
y = +1 case evaluated at ``b = y * beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

from .core import DomainError, NumericError

LOSSES = ("squared", "hinge", "logistic", "exponential")
CLASSIFICATION = ("hinge", "logistic", "exponential")

# modulus of strong convexity in z
GAMMA = {"squared": 1.0, "hinge": 0.0, "logistic": 0.0, "exponential": 0.0}

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12


def check_label(kind: str, y: float) -> float:
    if kind not in LOSSES:
        raise ValueError(f"unknown loss {kind!r}")
    y = float(y)
    if kind in CLASSIFICATION and y not in (-1.0, 1.0):
        raise ValueError(f"{kind} loss needs a label in {{-1, +1}}, got {y}")
    if not math.isfinite(y):
        raise ValueError("label must be finite")
    return y


def loss_value(kind: str, z, y: float):
    y = check_label(kind, y)
    if kind == "squared":
        r = y - z
        return 0.5 * r * r
    m = y * np.asarray(z, dtype=float)
    if kind == "hinge":
        out = np.maximum(1.0 - m, 0.0)
    elif kind == "logistic":
        out = np.logaddexp(0.0, -m)
    else:
        out = np.exp(-m)
    return float(out) if out.ndim == 0 else out


def loss_deriv(kind: str, z, y: float):
    """A subgradient of phi at z (hinge: 0 at the kink y*z = 1)."""
    y = check_label(kind, y)
    if kind == "squared":
        return z - y
    m = y * np.asarray(z, dtype=float)
    if kind == "hinge":
        out = np.where(m < 1.0, -y, 0.0)
    elif kind == "logistic":
        out = -y * expit(-m)
    else:
        out = -y * np.exp(-m)
    return float(out) if out.ndim == 0 else out


def loss_bregman(kind: str, z: float, z_new: float, y: float) -> float:
    """phi(z_new) - phi(z) - phi'(z) (z_new - z), the linearization gap in z."""
    if kind == "squared":
        check_label(kind, y)
        dz = z_new - z
        return 0.5 * dz * dz
    return (loss_value(kind, z_new, y) - loss_value(kind, z, y)
            - loss_deriv(kind, z, y) * (z_new - z))


@dataclass(frozen=True)
class DualDomain:
    """Interval of beta on which phi*(-beta) is finite."""

    lo: float
    hi: float
    open_lo: bool = True
    open_hi: bool = True

    def contains(self, beta: float) -> bool:
        above = beta > self.lo if self.open_lo else beta >= self.lo
        below = beta < self.hi if self.open_hi else beta <= self.hi
        return above and below

    def clamp(self, beta: float) -> float:
        return min(max(beta, self.lo), self.hi)


def dual_domain(kind: str, y: float) -> DualDomain:
    y = check_label(kind, y)
    if kind == "squared":
        return DualDomain(-math.inf, math.inf)
    if kind == "hinge":
        return DualDomain(min(0.0, y), max(0.0, y), False, False)
    if kind == "logistic":
        return DualDomain(min(0.0, y), max(0.0, y))
    return DualDomain(0.0, math.inf) if y > 0 else DualDomain(-math.inf, 0.0)


def conj_neg(kind: str, beta: float, y: float) -> float:
    """phi*(-beta); +inf outside the dual domain."""
    y = check_label(kind, y)
    if kind == "squared":
        return 0.5 * beta * beta - y * beta
    b = y * beta
    if kind == "hinge":
        return -b if 0.0 <= b <= 1.0 else math.inf
    if kind == "logistic":
        return float(xlogy(b, b) + xlogy(1.0 - b, 1.0 - b)) if 0.0 <= b <= 1.0 else math.inf
    return float(xlogy(b, b) - b) if b >= 0.0 else math.inf


def conj_neg_deriv(kind: str, beta: float, y: float) -> float:
    """d/dbeta phi*(-beta) inside the dual domain."""
    dom = dual_domain(kind, y)
    if not dom.contains(beta):
        raise DomainError(f"beta={beta} outside the {kind} dual domain [{dom.lo}, {dom.hi}]")
    return float(extended_conj_neg_deriv(kind, np.array([beta]), y)[0])


def extended_conj_neg_deriv(kind: str, beta: np.ndarray, y: float) -> np.ndarray:
    """Vectorised d/dbeta phi*(-beta), extended monotonically off the domain.

    Points below the domain map to -inf and points above to +inf; closed
    boundaries (hinge) keep their one-sided value.  This is the form the
    breakpoint searches need: the sign of the result still locates the
    optimum.
    """
    beta = np.asarray(beta, dtype=float)
    if kind == "squared":
        return beta - y
    b = y * beta
    out = np.empty_like(b)
    if kind == "hinge":
        out.fill(-1.0)
        out[b < 0.0] = -np.inf
        out[b > 1.0] = np.inf
    else:
        if kind == "logistic":
            inside = (b > 0.0) & (b < 1.0)
            bi = b[inside]
            out[inside] = np.log(bi) - np.log1p(-bi)
            out[b >= 1.0] = np.inf
        else:
            inside = b > 0.0
            out[inside] = np.log(b[inside])
        out[b <= 0.0] = -np.inf
    # chain rule back from b = y*beta; for y = -1 this also swaps the infinities
    return y * out


def solve_segment(kind: str, a: float, b: float, y: float) -> float:
    """Minimise phi*(-beta) + a*beta^2/2 - b*beta over the dual domain.

    Equivalently the root of ``conj_neg_deriv(beta) + a*beta - b`` clamped to
    the domain.  Closed forms for squared and hinge; logistic and exponential
    use safeguarded Newton in the variable ``s = conj_neg_deriv(beta)``.
    """
    if a < 0:
        raise ValueError(f"segment slope must be nonnegative, got {a}")
    y = check_label(kind, y)
    if kind == "squared":
        return (y + b) / (1.0 + a)
    dom = dual_domain(kind, y)
    if kind == "hinge":
        if a > 0:
            return dom.clamp((b + y) / a)
        slope = -y - b
        if slope > 0:
            return dom.lo
        if slope < 0:
            return dom.hi
        return dom.clamp(0.0)
    # reduced problem in bb = y*beta: k(bb) + a*bb - y*b = 0, k increasing
    rb = y * b
    if kind == "logistic":
        s = _newton_s("logistic", rb - a, rb, a, rb)
        bb = float(expit(s))
    else:
        if a == 0:
            s = rb
        else:
            # a*e^s = rb - s: the root lies in [lo, hi] and each bound tightens the other
            lo, hi = min(rb - 1.0, -math.log(a)), rb
            for _ in range(3):
                hi = min(hi, math.log((rb - lo) / a))
                if rb - hi > 0:
                    lo = max(lo, math.log((rb - hi) / a))
            s = _newton_s("exponential", lo, hi, a, rb)
        if s >= 709.0:
            raise NumericError(f"exponential dual solution exp({s}) overflows (a={a}, b={b})")
        bb = math.exp(s)
    return y * bb


def _newton_s(kind: str, lo: float, hi: float, a: float, rb: float) -> float:
    """Root of F(s) = s + a*beta(s) - rb on [lo, hi].

    beta(s) is the inverse of the reduced conjugate derivative: the sigmoid
    for logistic, exp for exponential.

    F' = 1 + a*beta'(s) >= 1, so Newton is well conditioned; a bisection step
    is taken whenever the Newton iterate leaves the bracket or |F| fails to
    halve.
    """
    tol = NEWTON_TOL * max(1.0, abs(rb))
    if kind == "exponential":
        def F(s):
            e = math.exp(s) if s < 700 else math.inf
            return s + a * e - rb, 1.0 + a * e
    else:
        def F(s):
            p = float(expit(s))
            return s + a * p - rb, 1.0 + a * p * (1.0 - p)

    s = hi
    f, fp = F(s)
    if f <= tol:
        return s
    f_lo, _ = F(lo)
    if f_lo >= -tol:
        return lo
    stalled = False
    for _ in range(NEWTON_MAX_ITER):
        if f > 0:
            hi = s
        else:
            lo = s
        step = s - f / fp
        if stalled or not (lo < step < hi):
            step = 0.5 * (lo + hi)
        last = abs(f)
        s = step
        f, fp = F(s)
        if abs(f) <= tol or hi - lo <= 4 * math.ulp(max(abs(lo), abs(hi))):
            return s
        stalled = abs(f) > 0.5 * last
    raise NumericError(
        f"segment Newton did not converge: a={a}, rb={rb}, s={s}, F={f}, bracket=({lo}, {hi})")


def _check_labels(kind: str, y: np.ndarray) -> np.ndarray:
    if kind not in LOSSES:
        raise ValueError(f"unknown loss {kind!r}")
    y = np.asarray(y, dtype=float)
    if kind in CLASSIFICATION and not np.all(np.abs(y) == 1.0):
        raise ValueError(f"{kind} loss needs labels in {{-1, +1}}")
    return y


def batch_loss(kind: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise phi(z_t; y_t) for a batch of predictions."""
    y = _check_labels(kind, y)
    if kind == "squared":
        r = y - z
        return 0.5 * r * r
    m = y * z
    if kind == "hinge":
        return np.maximum(1.0 - m, 0.0)
    if kind == "logistic":
        return np.logaddexp(0.0, -m)
    return np.exp(-m)


def batch_deriv(kind: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    y = _check_labels(kind, y)
    if kind == "squared":
        return z - y
    m = y * z
    if kind == "hinge":
        return np.where(m < 1.0, -y, 0.0)
    if kind == "logistic":
        return -y * expit(-m)
    return -y * np.exp(-m)
