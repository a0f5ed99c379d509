"""First-order baselines: iterative hard thresholding and FISTA."""

from __future__ import annotations

import time

import numpy as np

from .functionals import objective_F
from .operators import estimate_extremal_singular_values
from .trace import SolveTrace, TraceRecord


def hard_threshold(x, k: int) -> np.ndarray:
    """Keep the k largest-magnitude entries, ties broken by lowest index."""
    x = np.asarray(x, dtype=float)
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = np.zeros_like(x)
    if k == 0:
        return out
    order = np.argsort(-np.abs(x), kind="stable")
    keep = order[:k]
    out[keep] = x[keep]
    return out


def soft_threshold(x, threshold: float) -> np.ndarray:
    """Shrink each entry toward zero by the threshold (componentwise)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


def _rel_err(x, reference):
    if reference is None:
        return None
    nref = float(np.linalg.norm(reference))
    if nref == 0.0:
        return float(np.linalg.norm(x))
    return float(np.linalg.norm(np.asarray(x) - reference)) / nref


def iht(op, y, k: int, maxiter: int = 500, stop_tol: float = 1e-14,
        reference=None):
    """Hard-thresholded gradient descent with unit step.

    The unit step is valid for operators with orthonormal rows
    (||Phi|| = 1), which is the intended measurement model here.
    Objective column of the trace is the data residual norm.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    y = np.asarray(y, dtype=float)
    trace = SolveTrace(solver="iht",
                       config={"k": k, "maxiter": maxiter, "stop_tol": stop_tol})
    t0 = time.monotonic()
    x = np.zeros(op.cols)
    for it in range(1, maxiter + 1):
        resid = y - op.apply(x)
        x_new = hard_threshold(x + op.apply_adjoint(resid), k)
        trace.add(TraceRecord(it, time.monotonic() - t0, None, None, 0,
                              float(np.linalg.norm(y - op.apply(x_new))),
                              _rel_err(x_new, reference)))
        change = float(np.linalg.norm(x_new - x))
        scale = float(np.linalg.norm(x_new))
        x = x_new
        if scale > 0 and change <= stop_tol * scale:
            break
        if scale == 0.0 and change == 0.0:
            break
    return x, trace


def fista(op, y, lam: float, maxiter: int = 20000, stop_tol: float = 1e-14,
          reference=None, op_norm: float | None = None):
    """Momentum-accelerated proximal gradient for the penalized objective
    ||x||_1 + (1/2 lambda) ||Phi x - y||^2.

    Gradient steps use 1/L with L = ||Phi||^2 (estimated once unless
    supplied), and the shrinkage amount lambda/L, so the fixed point
    satisfies the l1 optimality conditions of the same objective the
    penalized IRLS family minimizes.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    y = np.asarray(y, dtype=float)
    t_pre = time.monotonic()
    if op_norm is None:
        op_norm = estimate_extremal_singular_values(op).sigma_max
    lip = max(op_norm**2, 1e-300)
    trace = SolveTrace(
        solver="fista",
        config={"lam": lam, "maxiter": maxiter, "stop_tol": stop_tol},
        precompute_s=time.monotonic() - t_pre,
    )
    t0 = time.monotonic()
    x = np.zeros(op.cols)
    z = x.copy()
    t_mom = 1.0
    for it in range(1, maxiter + 1):
        grad = op.apply_adjoint(op.apply(z) - y)
        x_new = soft_threshold(z - grad / lip, lam / lip)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
        z = x_new + (t_mom - 1.0) / t_next * (x_new - x)
        t_mom = t_next
        trace.add(TraceRecord(it, time.monotonic() - t0, None, None, 0,
                              objective_F(x_new, op, y, lam, 1.0),
                              _rel_err(x_new, reference)))
        change = float(np.linalg.norm(x_new - x))
        scale = float(np.linalg.norm(x_new))
        x = x_new
        if scale > 0 and change <= stop_tol * scale:
            break
        if scale == 0.0 and change == 0.0:
            break
    return x, trace
