"""Equality-constrained IRLS: exact dense iterations, the CG-accelerated
variant with its tolerance schedule and inner stopping rule, and the
practical modifications (inner iteration cap, explicit tolerance updates,
IHT warm start).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .functionals import (
    SummableSequence,
    f_eps_tau,
    j_tau,
    update_weights,
)
from .krylov import KrylovError, MCGIteration, StopPredicate, mcg_solve
from .operators import DiagonalScaledOperator, estimate_extremal_singular_values
from .trace import SolveTrace, TraceRecord
from .vectors import weighted_norm

_STAGNATION_RTOL = 1e-14


@dataclass(frozen=True)
class EqualityConfig:
    """Tunables for the equality-constrained family.

    ``None`` fields are resolved per variant and problem size at solve
    time: beta defaults to 0.5 (plain) or 2.0 (modified), eps_min to
    1e-9/N, maxiter_cg to floor(m/12) for the modified variant and
    unlimited otherwise, start_iht to 0.
    """

    K: int
    tau: float = 1.0
    beta: float | None = None
    eps_min: float | None = None
    a_sequence: SummableSequence = SummableSequence(scale=100.0, ratio=0.5)
    maxiter_outer: int = 30
    residual_floor: float = 1e-12
    maxiter_cg: float | None = None
    start_iht: int | None = None
    explicit_tol: bool | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.eps_min is not None and self.eps_min <= 0:
            raise ValueError("eps_min must be positive")
        if self.maxiter_outer < 1:
            raise ValueError("maxiter_outer must be at least 1")
        if self.residual_floor < 0:
            raise ValueError("residual_floor must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "tau": self.tau,
            "beta": self.beta,
            "eps_min": self.eps_min,
            "a_sequence": self.a_sequence.to_dict(),
            "maxiter_outer": self.maxiter_outer,
            "residual_floor": self.residual_floor,
            "maxiter_cg": self.maxiter_cg,
            "start_iht": self.start_iht,
            "explicit_tol": self.explicit_tol,
        }


def tol_schedule(c_n: float, a_next: float, wbar_next: float, tau: float) -> float:
    """Largest inner tolerance compatible with the summable-budget rule.

    Solves sqrt(tol) = sqrt((c/2)^2 + 2a/(tau Wbar^2)) - c/2, the equality
    case of the admissible range, so the inner solver does as little work
    as the convergence argument allows.
    """
    if c_n < 0:
        raise ValueError("c_n must be nonnegative")
    if wbar_next < 1.0:
        raise ValueError("Wbar must be at least 1")
    root = np.sqrt((0.5 * c_n) ** 2 + 2.0 * a_next / (tau * wbar_next**2))
    return float((root - 0.5 * c_n) ** 2)


def cn_wbar(x_prev, tol_prev: float, w_prev, eps_prev: float, eps_curr: float,
            tau: float):
    """Schedule ingredients from the previous outer iterate.

    Returns (c, Wbar, W) where W is the realized weight-ratio norm
    max_j sqrt(w_j / w_prev_j) for w = update_weights(x_prev, eps_prev),
    Wbar the computable upper bound built from eps_curr, and
    c = 2 W (||x_prev||_{l2(w_prev)} + sqrt(tol_prev)).
    """
    if eps_curr <= 0:
        raise ValueError("current epsilon must be positive")
    x_prev = np.asarray(x_prev, dtype=float)
    w_prev = np.asarray(w_prev, dtype=float)
    w_curr = update_weights(x_prev, eps_prev, tau)
    w_ratio = float(np.sqrt(np.max(w_curr / w_prev)))
    max_abs = float(np.max(np.abs(x_prev), initial=0.0))
    wbar = float(
        np.sqrt((max_abs ** (2.0 - tau) + eps_prev ** (2.0 - tau))
                / eps_curr ** (2.0 - tau))
    )
    c = 2.0 * w_ratio * (weighted_norm(x_prev, w_prev, 2.0) + np.sqrt(tol_prev))
    return c, wbar, w_ratio


def mcg_residual_threshold(tol: float, x_prev, eps_prev: float, sigma_min: float,
                           op_norm: float, tau: float) -> float:
    """Squared-residual level at which the weighted solve error is within tol."""
    x_prev = np.asarray(x_prev, dtype=float)
    ratio = float(np.max(np.abs(x_prev), initial=0.0)) / eps_prev
    bracket = (1.0 + ratio**2) ** ((2.0 - tau) / 2.0)
    return float(sigma_min * tol / (bracket * op_norm**2))


def _rel_change(x_new, x_old) -> float:
    denom = float(np.linalg.norm(x_new))
    if denom == 0.0:
        return float(np.linalg.norm(x_old))
    return float(np.linalg.norm(x_new - x_old)) / denom


def _reference_errors(x, reference, tau):
    if reference is None:
        return None, None
    diff = np.asarray(x) - np.asarray(reference)
    nref = float(np.linalg.norm(reference))
    rel = float(np.linalg.norm(diff)) / nref if nref > 0 else float(np.linalg.norm(x))
    etau = float(np.sum(np.abs(diff) ** tau))
    return rel, etau


def irls_exact(op, y, cfg: EqualityConfig, reference=None):
    """Plain IRLS with exact dense weighted least-squares solves.

    Each outer step solves (Phi D Phi^T) theta = y by a symmetric positive
    definite factorization and sets x = D Phi^T theta; the smoothing
    parameter follows the rank rule with beta = 1/N.
    """
    y = np.asarray(y, dtype=float)
    n, m = op.cols, op.rows
    if cfg.K >= n:
        raise ValueError("K must be smaller than the signal dimension")
    eps_min = cfg.eps_min if cfg.eps_min is not None else 1e-9 / n
    trace = SolveTrace(solver="irls", config=cfg.to_dict())
    t0 = time.monotonic()

    if not np.any(y):
        x = np.zeros(n)
        rel, etau = _reference_errors(x, reference, cfg.tau)
        trace.add(TraceRecord(0, time.monotonic() - t0, 0.0, 0.0, 0, 0.0, rel, etau))
        return x, trace

    phi = op.to_dense()
    eps = 1.0
    w = np.ones(n)
    x_prev = None
    stagnant = 0
    for it in range(1, cfg.maxiter_outer + 1):
        d = 1.0 / w
        gram = (phi * d) @ phi.T
        try:
            theta = scipy.linalg.solve(gram, y, assume_a="pos")
        except scipy.linalg.LinAlgError as exc:
            raise ValueError(f"weighted Gram matrix is rank deficient: {exc}") from exc
        x = d * (phi.T @ theta)

        r_sorted = np.sort(np.abs(x))[::-1]
        eps_raw = min(eps, float(r_sorted[cfg.K]) / n)
        ksparse = eps_raw == 0.0
        eps_new = max(eps_raw, eps_min) if not ksparse else 0.0
        at_floor = eps_raw < eps_min

        rel, etau = _reference_errors(x, reference, cfg.tau)
        obj = f_eps_tau(x, eps_new, cfg.tau)
        trace.add(TraceRecord(it, time.monotonic() - t0, eps_new, 0.0, 0, obj,
                              rel, etau))
        if ksparse:
            return x, trace
        if x_prev is not None and _rel_change(x, x_prev) < _STAGNATION_RTOL:
            stagnant += 1
            if eps_new > eps * (1.0 - 1e-10) or (at_floor and stagnant >= 2):
                return x, trace
        else:
            stagnant = 0
        w = update_weights(x, eps_new, cfg.tau)
        eps = eps_new
        x_prev = x
    return x, trace


def _resolve_equality(cfg: EqualityConfig, modified: bool, n: int, m: int):
    beta = cfg.beta if cfg.beta is not None else (2.0 if modified else 0.5)
    eps_min = cfg.eps_min if cfg.eps_min is not None else 1e-9 / n
    if cfg.maxiter_cg is not None:
        cap = cfg.maxiter_cg
    else:
        cap = m // 12 if modified else np.inf
    explicit = cfg.explicit_tol if cfg.explicit_tol is not None else modified
    start_iht = cfg.start_iht if cfg.start_iht is not None else 0
    return replace(cfg, beta=beta, eps_min=eps_min, maxiter_cg=cap,
                   explicit_tol=explicit, start_iht=start_iht)


def cg_irls(op, y, cfg: EqualityConfig, reference=None,
            on_outer: Optional[Callable[[dict], None]] = None):
    """CG-accelerated IRLS with the implicit tolerance rule.

    The inner weighted least-squares problems are solved by MCG on
    T = Phi D^(1/2), stopped when the squared residual falls under the
    schedule-derived threshold (refreshed inside the inner loop as the
    candidate smoothing parameter changes) or under the absolute floor.
    """
    return _cg_irls_engine(op, y, cfg, modified=False, reference=reference,
                           on_outer=on_outer, solver_name="cg-irls")


def cg_irls_modified(op, y, cfg: EqualityConfig, reference=None,
                     on_outer: Optional[Callable[[dict], None]] = None):
    """CG-IRLS with the practical modifications enabled by default:
    capped inner iterations (floor(m/12)), tolerance updated only between
    outer iterations, and an optional IHT warm start via ``cfg.start_iht``.
    Passing degenerate values (no cap, implicit tolerance, no warm start,
    matching beta) reproduces ``cg_irls`` iterate for iterate.
    """
    return _cg_irls_engine(op, y, cfg, modified=True, reference=reference,
                           on_outer=on_outer, solver_name="cg-irls-m")


def _cg_irls_engine(op, y, cfg, modified, reference, on_outer, solver_name):
    y = np.asarray(y, dtype=float)
    n, m = op.cols, op.rows
    if cfg.K >= n:
        raise ValueError("K must be smaller than the signal dimension")
    cfg = _resolve_equality(cfg, modified, n, m)

    t_pre = time.monotonic()
    sig_max, sig_min, _ = estimate_extremal_singular_values(op)
    precompute_s = time.monotonic() - t_pre

    trace = SolveTrace(solver=solver_name, config=cfg.to_dict(),
                       precompute_s=precompute_s)
    t0 = time.monotonic()

    if not np.any(y):
        x = np.zeros(n)
        rel, etau = _reference_errors(x, reference, cfg.tau)
        trace.add(TraceRecord(0, time.monotonic() - t0, 0.0, 0.0, 0, 0.0, rel, etau))
        return x, trace

    theta = np.zeros(m)
    if cfg.start_iht:
        from .baselines import iht  # local import; baselines depend on trace only

        x_prev, _ = iht(op, y, cfg.K, maxiter=int(cfg.start_iht))
        eps = min(1.0, cfg.beta * float(np.sort(np.abs(x_prev))[::-1][cfg.K]))
        eps = max(eps, cfg.eps_min)
        w_curr = update_weights(x_prev, eps, cfg.tau)
        w_prev = w_curr.copy()
        rel, etau = _reference_errors(x_prev, reference, cfg.tau)
        trace.add(TraceRecord(0, time.monotonic() - t0, eps, 0.0, 0,
                              f_eps_tau(x_prev, eps, cfg.tau), rel, etau))
    else:
        # seed the recursion with one numerically exact unweighted pass
        x_prev, theta, rep = mcg_solve(
            op, y, theta0=theta,
            stop=StopPredicate(floor=cfg.residual_floor), maxiter=m + 2,
        )
        eps = 1.0
        w_curr = np.ones(n)
        w_prev = np.ones(n)
        rel, etau = _reference_errors(x_prev, reference, cfg.tau)
        trace.add(TraceRecord(0, time.monotonic() - t0, eps, 0.0, rep.iterations,
                              f_eps_tau(x_prev, eps, cfg.tau), rel, etau))
    tol_prev = 0.0
    stagnant = 0
    x = x_prev

    for it in range(1, cfg.maxiter_outer + 1):
        d_sqrt = 1.0 / np.sqrt(w_curr)
        t_op = DiagonalScaledOperator(op, d_sqrt)
        a_next = cfg.a_sequence.term(it)
        # weight-ratio norm from the tracked weights; at the first pass both
        # are the header initialization, giving the seeded value 1
        w_ratio = float(np.sqrt(np.max(w_curr / w_prev)))
        c_n = 2.0 * w_ratio * (weighted_norm(x_prev, w_prev, 2.0)
                               + np.sqrt(tol_prev))

        def wbar_for(eps_next):
            max_abs = float(np.max(np.abs(x_prev), initial=0.0))
            return float(np.sqrt(
                (max_abs ** (2.0 - cfg.tau) + eps ** (2.0 - cfg.tau))
                / eps_next ** (2.0 - cfg.tau)
            ))

        ksparse = False
        try:
            if cfg.explicit_tol:
                tol_it = tol_schedule(c_n, a_next, wbar_for(eps), cfg.tau)
                thr = mcg_residual_threshold(tol_it, x_prev, eps, sig_min,
                                             sig_max, cfg.tau)
                stop = StopPredicate(
                    floor=cfg.residual_floor,
                    predicate=lambda i, rn: rn * rn <= thr or i >= cfg.maxiter_cg,
                )
                xbar, theta, rep = mcg_solve(t_op, y, theta0=theta, stop=stop,
                                             maxiter=m + 2)
                inner = rep.iterations
                x = d_sqrt * xbar
                eps_raw = min(eps, cfg.beta * float(np.sort(np.abs(x))[::-1][cfg.K]))
                ksparse = eps_raw == 0.0
            else:
                stepper = MCGIteration(t_op, y, theta0=theta)
                tol_it = 0.0
                while True:
                    x_cand = d_sqrt * stepper.xbar
                    eps_raw = min(
                        eps, cfg.beta * float(np.sort(np.abs(x_cand))[::-1][cfg.K])
                    )
                    if eps_raw == 0.0:
                        x, ksparse, inner = x_cand, True, stepper.iterations
                        tol_it = 0.0
                        break
                    tol_it = tol_schedule(
                        c_n, a_next, wbar_for(max(eps_raw, cfg.eps_min)), cfg.tau
                    )
                    thr = mcg_residual_threshold(tol_it, x_prev, eps, sig_min,
                                                 sig_max, cfg.tau)
                    rn = stepper.rho_norm
                    if (rn <= cfg.residual_floor or rn * rn <= thr
                            or stepper.iterations >= cfg.maxiter_cg):
                        x, inner = x_cand, stepper.iterations
                        break
                    if not stepper.step():
                        x, inner = d_sqrt * stepper.xbar, stepper.iterations
                        break
                theta = stepper.theta
        except KrylovError as exc:
            raise KrylovError(f"outer iteration {it}: {exc}") from exc

        eps_new = 0.0 if ksparse else max(eps_raw, cfg.eps_min)
        at_floor = not ksparse and eps_raw < cfg.eps_min

        if ksparse:
            rel, etau = _reference_errors(x, reference, cfg.tau)
            trace.add(TraceRecord(it, time.monotonic() - t0, 0.0, 0.0, inner,
                                  f_eps_tau(x, 0.0, cfg.tau), rel, etau))
            if on_outer is not None:
                on_outer(dict(iteration=it, x=x, x_prev=x_prev, w=None,
                              w_prev=w_curr, eps=0.0, eps_prev=eps, tol=0.0,
                              inner_iterations=inner, theta=theta))
            return x, trace

        w_new = update_weights(x, eps_new, cfg.tau)
        chain = (
            j_tau(x, w_new, eps_new, cfg.tau),
            j_tau(x, w_curr, eps_new, cfg.tau),
            j_tau(x, w_curr, eps, cfg.tau),
        )
        rel, etau = _reference_errors(x, reference, cfg.tau)
        trace.add(TraceRecord(it, time.monotonic() - t0, eps_new, tol_it, inner,
                              chain[0], rel, etau, j_chain=chain))
        if on_outer is not None:
            on_outer(dict(iteration=it, x=x, x_prev=x_prev, w=w_new, w_prev=w_curr,
                          eps=eps_new, eps_prev=eps, tol=tol_it,
                          inner_iterations=inner, theta=theta))

        small_move = _rel_change(x, x_prev) < _STAGNATION_RTOL
        eps_unchanged = eps_new > eps * (1.0 - 1e-10)
        if small_move and it >= 2 and eps_unchanged:
            return x, trace
        if small_move and at_floor:
            stagnant += 1
            if stagnant >= 2:
                return x, trace
        else:
            stagnant = 0

        w_prev, w_curr = w_curr, w_new
        tol_prev = tol_it
        x_prev = x
        eps = eps_new
    return x, trace
