"""Correlated synthetic lasso stream and a sparse text reader.

Synthetic features are a_tj = c_tj + delta * d_t with c_tj, d_t ~ N(0, 1),
so every pair of coordinates has correlation delta^2 / (1 + delta^2) = rho.
Labels are b_t = a_t^T w_true + tau * eps_t.

Draws come from numpy's default generator (PCG64) seeded with the config
seed, in the fixed order d_t, c_t1..c_td, eps_t per example.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import ConfigurationError, Example, ParseError, SparseVector


@dataclass(frozen=True)
class SyntheticConfig:
    d: int = 1000
    rho: float = 0.0
    tau: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"dimension must be a positive integer, got {self.d}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1), got {self.rho}")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"tau must be nonnegative, got {self.tau}")

    @property
    def delta(self) -> float:
        return math.sqrt(self.rho / (1.0 - self.rho))


def true_weights(d: int) -> np.ndarray:
    """w_j = (-1)^j exp(-2(j-1)/20) for j = 1..d, stored 0-based."""
    if d < 1:
        raise ConfigurationError(f"dimension must be positive, got {d}")
    j = np.arange(1, d + 1)
    return np.where(j % 2 == 0, 1.0, -1.0) * np.exp(-2.0 * (j - 1) / 20.0)


def make_rng(cfg: SyntheticConfig) -> np.random.Generator:
    return np.random.default_rng(cfg.seed)


def next_example(cfg: SyntheticConfig, rng: np.random.Generator,
                 w_true: np.ndarray | None = None) -> Example:
    if w_true is None:
        w_true = true_weights(cfg.d)
    draws = rng.standard_normal(cfg.d + 2)
    a = draws[1:cfg.d + 1] + cfg.delta * draws[0]
    b = float(a @ w_true) + cfg.tau * draws[cfg.d + 1]
    return Example(a, b)


def stream(cfg: SyntheticConfig, T: int | None = None) -> Iterator[Example]:
    """Yield T examples (forever when T is None) from a fresh generator."""
    rng = make_rng(cfg)
    w_true = true_weights(cfg.d)
    t = 0
    while T is None or t < T:
        yield next_example(cfg, rng, w_true)
        t += 1


def generate(cfg: SyntheticConfig, T: int) -> list[Example]:
    return list(stream(cfg, T))


def read_sparse_text(path, dim: int | None = None) -> list[Example]:
    """Parse lines of the form ``label idx:val idx:val ...`` (1-based indices).

    Blank lines and lines starting with ``#`` are skipped.  The dimension is
    the largest index in the file unless ``dim`` is given.
    """
    rows = []
    max_idx = 0
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                label = float(parts[0])
                idx, val = [], []
                for tok in parts[1:]:
                    i, v = tok.split(":")
                    idx.append(int(i))
                    val.append(float(v))
            except ValueError as exc:
                raise ParseError(f"line {lineno}: malformed entry ({exc})") from None
            if not math.isfinite(label) or not all(map(math.isfinite, val)):
                raise ParseError(f"line {lineno}: non-finite value")
            if idx and idx[0] < 1:
                raise ParseError(f"line {lineno}: indices are 1-based")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ParseError(f"line {lineno}: indices must be strictly increasing")
            if idx:
                max_idx = max(max_idx, idx[-1])
            rows.append((label, idx, val))
    if dim is None:
        dim = max_idx
    elif max_idx > dim:
        raise ParseError(f"index {max_idx} exceeds the requested dimension {dim}")
    out = []
    for label, idx, val in rows:
        sv = SparseVector(np.array(idx, dtype=np.int64) - 1, np.array(val, dtype=float), dim)
        out.append(Example(sv, label))
    return out
