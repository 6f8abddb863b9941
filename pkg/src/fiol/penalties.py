"""Regularizers r(w): none, lambda*||w||_1 and (lambda/2)*||w||_2^2."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, soft_threshold

PENALTIES = ("none", "l1", "l2")


@dataclass(frozen=True)
class Penalty:
    kind: str = "none"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in PENALTIES:
            raise ConfigurationError(f"unknown penalty {self.kind!r}")
        if not self.lam >= 0:
            raise ConfigurationError(f"penalty weight must be nonnegative, got {self.lam}")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.lam > 0

    @property
    def l1(self) -> float:
        return self.lam if self.kind == "l1" else 0.0

    @property
    def l2(self) -> float:
        return self.lam if self.kind == "l2" else 0.0


NONE = Penalty()


def penalty_value(p: Penalty, w) -> float:
    w = np.asarray(w, dtype=float)
    if p.kind == "l1":
        return p.lam * float(np.abs(w).sum())
    if p.kind == "l2":
        return 0.5 * p.lam * float(np.dot(w, w))
    return 0.0


def penalty_subgrad(p: Penalty, w) -> np.ndarray:
    """A subgradient of r at w; for l1 the minimal-norm choice (0 at w_i = 0)."""
    w = np.asarray(w, dtype=float)
    if p.kind == "l1":
        return p.lam * np.sign(w)
    if p.kind == "l2":
        return p.lam * w
    return np.zeros_like(w)


def penalty_prox(p: Penalty, w, eta: float) -> np.ndarray:
    """argmin_v r(v) + ||v - w||^2 / (2 eta)."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    w = np.asarray(w, dtype=float)
    if p.kind == "l1":
        return soft_threshold(w, p.lam * eta)
    if p.kind == "l2":
        return w / (1.0 + p.lam * eta)
    return w.copy()


def penalty_bregman(p: Penalty, w, w_new) -> float:
    """r(w_new) - r(w) - <r'(w), w_new - w> with the subgradient above.

    Written termwise so that rounding cannot make it negative.
    """
    w = np.asarray(w, dtype=float)
    w_new = np.asarray(w_new, dtype=float)
    if p.kind == "l1":
        # |w_i| = sign(w_i) w_i, so each term is |w'_i| - sign(w_i) w'_i >= 0
        return p.lam * float(np.sum(np.abs(w_new) - np.sign(w) * w_new))
    if p.kind == "l2":
        diff = w_new - w
        return 0.5 * p.lam * float(np.dot(diff, diff))
    return 0.0
