"""Weighted norms, rearrangements, and best k-term approximation errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def weighted_norm(x: np.ndarray, w: np.ndarray, p: float = 2.0) -> float:
    """(sum |x_i|^p w_i)^(1/p) for a strictly positive weight vector."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ValueError("x and w must have the same shape")
    if not p > 0:
        raise ValueError("p must be positive")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return float(np.sum(np.abs(x) ** p * w) ** (1.0 / p))


def nonincreasing_rearrangement(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitudes sorted descending plus the permutation that produced them.

    Ties are broken by original index (stable), so the output is a
    deterministic function of the input.
    """
    x = np.asarray(x, dtype=float)
    perm = np.argsort(-np.abs(x), kind="stable")
    return np.abs(x)[perm], perm


def best_k_term_error(x: np.ndarray, k: int, tau: float) -> float:
    """Tail sum r_{k+1}^tau + ... + r_N^tau of the rearrangement of x."""
    x = np.asarray(x, dtype=float)
    if not 0 <= k <= x.size:
        raise ValueError(f"need 0 <= K <= N, got K={k}, N={x.size}")
    if not 0 < tau:
        raise ValueError("tau must be positive")
    r, _ = nonincreasing_rearrangement(x)
    return float(np.sum(r[k:] ** tau))


@dataclass(frozen=True)
class WeightedVector:
    """A vector paired with the strictly positive weights of its norm."""

    values: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        if values.shape != weight.shape:
            raise ValueError("values and weight must have the same shape")
        if np.any(weight <= 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weight", weight)

    def norm(self, p: float = 2.0) -> float:
        return weighted_norm(self.values, self.weight, p)
