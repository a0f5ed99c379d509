"""Conjugate gradient solvers: plain, Jacobi-preconditioned, and the
normal-equations variant that produces minimum-norm feasible points.

Residuals are recomputed from scratch every step (one extra operator
application) instead of via the cheap recursive update; this matches the
written iteration and is more robust near the tiny residual floors used
by the IRLS drivers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

STOP_FLOOR = "residual_below_delta"
STOP_PREDICATE = "custom_predicate"
STOP_MAXITER = "maxiter"
STOP_EXACT = "exact_zero_residual"

_TINY_CURVATURE = 1e-300


class KrylovError(RuntimeError):
    """Indefinite operator or non-finite iterate inside a CG loop."""


@dataclass(frozen=True)
class StopPredicate:
    """Absolute residual floor plus an optional pure halting predicate.

    The predicate receives (iteration index, residual norm) and returns
    True to halt.  It must not mutate solver state.
    """

    floor: float = 0.0
    predicate: Optional[Callable[[int, float], bool]] = None

    def __post_init__(self):
        if self.floor < 0:
            raise ValueError("residual floor must be nonnegative")

    def check(self, iteration: int, residual_norm: float) -> str | None:
        if residual_norm <= self.floor:
            return STOP_FLOOR
        if self.predicate is not None and self.predicate(iteration, residual_norm):
            return STOP_PREDICATE
        return None


@dataclass(frozen=True)
class KrylovReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    stop_reason: str


def _as_apply(a) -> Callable[[np.ndarray], np.ndarray]:
    if callable(a):
        return a
    raise TypeError("operator must be callable (LinearOperator or function)")


def _check_finite(v: float) -> None:
    if not np.isfinite(v):
        raise KrylovError("numerical breakdown: non-finite value in CG iterate")


def _cg_core(a, y, x0, stop, maxiter, m_inv=None, callback=None):
    apply_a = _as_apply(a)
    y = np.asarray(y, dtype=float)
    x = np.zeros_like(y) if x0 is None else np.array(x0, dtype=float)
    if maxiter is None:
        maxiter = y.size + 2
    r = y - apply_a(x)
    z = r if m_inv is None else m_inv * r
    p = z.copy()
    i = 0
    while True:
        rnorm = float(np.linalg.norm(r))
        _check_finite(rnorm)
        if callback is not None:
            callback(i, x, rnorm)
        if rnorm == 0.0:
            reason = STOP_EXACT
            break
        if stop is not None:
            reason = stop.check(i, rnorm)
            if reason is not None:
                break
        if i >= maxiter:
            reason = STOP_MAXITER
            break
        ap = apply_a(p)
        curv = float(ap @ p)
        _check_finite(curv)
        if curv < 0.0:
            raise KrylovError("operator not positive definite")
        if curv < _TINY_CURVATURE:
            # direction annihilated: residual is numerically unreachable noise
            reason = STOP_EXACT
            break
        alpha = float(r @ p) / curv
        x = x + alpha * p
        r = y - apply_a(x)
        z = r if m_inv is None else m_inv * r
        beta = float(ap @ z) / curv
        p = z - beta * p
        i += 1
    return x, KrylovReport(i, float(np.linalg.norm(r)), reason != STOP_MAXITER, reason)


def cg_solve(a, y, x0=None, stop: StopPredicate | None = None, maxiter=None,
             callback=None):
    """Conjugate gradient for a symmetric positive definite system a(x) = y.

    ``a`` is a callable (or LinearOperator) applying the matrix.  Stops on
    the StopPredicate, on an exactly zero residual, or after ``maxiter``
    steps (default: problem size + 2).  Returns (x, KrylovReport).
    """
    return _cg_core(a, y, x0, stop, maxiter, m_inv=None, callback=callback)


def pcg_solve(a, m_inv, y, x0=None, stop: StopPredicate | None = None,
              maxiter=None, callback=None):
    """Diagonally preconditioned CG; reported residuals are unpreconditioned.

    ``m_inv`` holds the reciprocal diagonal of the preconditioner.  With
    ``m_inv`` identically one the iterate sequence coincides with
    ``cg_solve``.
    """
    m_inv = np.asarray(m_inv, dtype=float)
    if np.any(m_inv <= 0):
        raise ValueError("preconditioner entries must be strictly positive")
    return _cg_core(a, y, x0, stop, maxiter, m_inv=m_inv, callback=callback)


class MCGIteration:
    """Stepwise CG on T T* theta = y, tracking xbar = T* theta.

    The residual rho = y - T T* theta is recomputed from the current theta
    every step; the conjugate direction image T* p is updated by the exact
    recursion T* p_{i+1} = T* rho_{i+1} - beta T* p_i.
    """

    def __init__(self, t, y, theta0=None):
        self.t = t
        self.y = np.asarray(y, dtype=float)
        m = t.rows
        if theta0 is None:
            theta0 = np.zeros(m)
        self.theta = np.array(theta0, dtype=float)
        self.xbar = t.apply_adjoint(self.theta)
        self.rho = self.y - t.apply(self.xbar)
        self.p = self.rho.copy()
        self.tp = t.apply_adjoint(self.p)
        self.iterations = 0

    @property
    def rho_norm(self) -> float:
        return float(np.linalg.norm(self.rho))

    def step(self) -> bool:
        """Advance one iteration; False when the direction has collapsed."""
        curv = float(self.tp @ self.tp)
        _check_finite(curv)
        if curv < _TINY_CURVATURE:
            return False
        alpha = float(self.rho @ self.p) / curv
        self.theta = self.theta + alpha * self.p
        self.xbar = self.t.apply_adjoint(self.theta)
        self.rho = self.y - self.t.apply(self.xbar)
        _check_finite(float(np.linalg.norm(self.rho)))
        trho = self.t.apply_adjoint(self.rho)
        beta = float(self.tp @ trho) / curv
        self.p = self.rho - beta * self.p
        self.tp = trho - beta * self.tp
        self.iterations += 1
        return True


def mcg_solve(t, y, theta0=None, stop: StopPredicate | None = None, maxiter=None,
              callback=None):
    """Minimum-norm solve of T x = y through the system T T* theta = y.

    Requires T surjective (T T* positive definite).  Returns
    (xbar, theta, KrylovReport) with xbar = T* theta.
    """
    it = MCGIteration(t, y, theta0)
    if maxiter is None:
        maxiter = t.rows + 2
    while True:
        rnorm = it.rho_norm
        _check_finite(rnorm)
        if callback is not None:
            callback(it.iterations, it.xbar, rnorm)
        if rnorm == 0.0:
            reason = STOP_EXACT
            break
        if stop is not None:
            reason = stop.check(it.iterations, rnorm)
            if reason is not None:
                break
        if it.iterations >= maxiter:
            reason = STOP_MAXITER
            break
        if not it.step():
            reason = STOP_EXACT
            break
    report = KrylovReport(it.iterations, it.rho_norm, reason != STOP_MAXITER, reason)
    return it.xbar, it.theta, report
