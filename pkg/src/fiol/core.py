"""Shared types, elementwise primitives and step-size schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class FiolError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(FiolError, ValueError):
    """Inconsistent dimensions or option combinations."""


class DomainError(FiolError, ValueError):
    """A dual variable outside the domain of a conjugate."""


class NumericError(FiolError, ArithmeticError):
    """A solver failed to converge or produced non-finite values."""


class ParseError(FiolError, ValueError):
    pass


@dataclass(frozen=True)
class SparseVector:
    """Feature vector stored as strictly increasing (index, value) pairs."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("sparse indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError(f"sparse index out of range for dimension {self.dim}")
        if not np.all(np.isfinite(val)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


Features = Union[np.ndarray, SparseVector]


@dataclass(frozen=True)
class Example:
    """One streamed observation."""

    features: Features
    label: float

    def __post_init__(self):
        if not isinstance(self.features, SparseVector):
            x = np.asarray(self.features, dtype=float)
            if x.ndim != 1:
                raise ValueError("dense features must be a 1-d array")
            if not np.all(np.isfinite(x)):
                raise ValueError("feature values must be finite")
            object.__setattr__(self, "features", x)
        label = float(self.label)
        if not math.isfinite(label):
            raise ValueError("label must be finite")
        object.__setattr__(self, "label", label)

    @property
    def dim(self) -> int:
        if isinstance(self.features, SparseVector):
            return self.features.dim
        return self.features.shape[0]

    def dense(self, d: int | None = None) -> np.ndarray:
        """Return the features as a dense array, optionally checking/padding to ``d``."""
        if isinstance(self.features, SparseVector):
            if d is None or d == self.features.dim:
                return self.features.toarray()
            if d < self.features.dim and self.features.indices.size and self.features.indices[-1] >= d:
                raise ConfigurationError(f"example has index beyond dimension {d}")
            out = np.zeros(d)
            out[self.features.indices] = self.features.values
            return out
        if d is not None and d != self.features.shape[0]:
            raise ConfigurationError(f"expected dimension {d}, got {self.features.shape[0]}")
        return self.features


def as_weights(w, d: int | None = None) -> np.ndarray:
    """Validate a dense weight vector (finite, 1-d, optional length check)."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be a 1-d array")
    if d is not None and w.shape[0] != d:
        raise ConfigurationError(f"expected {d} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


def dot(x: Features, w) -> float:
    """Inner product of a dense or sparse feature vector with dense weights."""
    w = np.asarray(w, dtype=float)
    if isinstance(x, SparseVector):
        if x.dim != w.shape[0]:
            raise ConfigurationError(f"dimension mismatch: {x.dim} vs {w.shape[0]}")
        return float(np.dot(x.values, w[x.indices]))
    x = np.asarray(x, dtype=float)
    if x.shape != w.shape:
        raise ConfigurationError(f"dimension mismatch: {x.shape} vs {w.shape}")
    return float(np.dot(x, w))


def soft_threshold(w, kappa: float) -> np.ndarray:
    """sign(w) * max(|w| - kappa, 0), with exact zeros wherever |w| <= kappa."""
    if kappa < 0:
        raise ValueError(f"threshold must be nonnegative, got {kappa}")
    w = np.asarray(w, dtype=float)
    out = np.sign(w) * np.maximum(np.abs(w) - kappa, 0.0)
    # np.sign(-x) * 0.0 gives -0.0; normalise so zero counting is unambiguous
    out[out == 0.0] = 0.0
    return out


SCHEDULES = ("constant", "inv_sqrt_t", "inv_sqrt_T", "inv_sigma_t")


@dataclass(frozen=True)
class StepSchedule:
    """Step size as a function of the round t (1-based).

    ``constant``     c
    ``inv_sqrt_t``   c / sqrt(t)
    ``inv_sqrt_T``   c / sqrt(horizon)
    ``inv_sigma_t``  1 / (sigma t)

    The convex-case schedules use a free scale ``c`` in place of the
    (unobservable) ratio of domain radius to gradient bound.
    """

    kind: str = "constant"
    c: float = 1.0
    sigma: float | None = None
    horizon: int | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULES:
            raise ConfigurationError(f"unknown schedule {self.kind!r}")
        if self.kind == "inv_sigma_t":
            if self.sigma is None or not self.sigma > 0:
                raise ConfigurationError("inv_sigma_t needs sigma > 0")
        elif not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigurationError(f"step scale must be positive, got {self.c}")
        if self.kind == "inv_sqrt_T" and (self.horizon is None or self.horizon < 1):
            raise ConfigurationError("inv_sqrt_T needs a positive horizon")

    def eta_at(self, t: int) -> float:
        return eta_at(self, t)


def eta_at(s: StepSchedule, t: int) -> float:
    if t < 1:
        raise ValueError(f"rounds are numbered from 1, got t={t}")
    if s.kind == "constant":
        return float(s.c)
    if s.kind == "inv_sqrt_t":
        return s.c / math.sqrt(t)
    if s.kind == "inv_sqrt_T":
        return s.c / math.sqrt(s.horizon)
    return 1.0 / (s.sigma * t)
