"""Lagrangian IRLS: exact dense iterations and the CG-accelerated variant
with its explicit tolerance rule, plus Jacobi-preconditioned versions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .functionals import (
    SummableSequence,
    j_tau_lambda,
    update_epsilon_objective,
    update_weights,
)
from .krylov import KrylovError, StopPredicate, cg_solve, pcg_solve
from .operators import estimate_extremal_singular_values
from .trace import SolveTrace, TraceRecord
from .equality import _rel_change, _reference_errors

_STAGNATION_RTOL = 1e-14
_EPS_DECAY = 0.8


@dataclass(frozen=True)
class LagrangianConfig:
    """Tunables for the penalized family.

    ``None`` fields resolve at solve time: a_sequence to
    sqrt(N m) 1e4 (1/2)^n and residual_floor to 1e-16 N^(3/2) m.
    ``maxiter_cg=None`` leaves the inner solver uncapped; the capped
    preconditioned presets use 4 (noisy) and 40 (noiseless benchmark).
    """

    lam: float
    tau: float = 1.0
    phi: float = 0.3
    alpha: float = 0.9
    eps_min: float = 1e-9
    eps_decay: bool = True
    a_sequence: SummableSequence | None = None
    maxiter_outer: int = 25
    residual_floor: float | None = None
    precondition: bool = False
    maxiter_cg: float | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if not 0 < self.phi < 1.0 / (4.0 - self.tau):
            raise ValueError("phi must lie in (0, 1/(4 - tau))")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.eps_min <= 0:
            raise ValueError("eps_min must be positive")
        if self.maxiter_outer < 1:
            raise ValueError("maxiter_outer must be at least 1")

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "tau": self.tau,
            "phi": self.phi,
            "alpha": self.alpha,
            "eps_min": self.eps_min,
            "eps_decay": self.eps_decay,
            "a_sequence": None if self.a_sequence is None
            else self.a_sequence.to_dict(),
            "maxiter_outer": self.maxiter_outer,
            "residual_floor": self.residual_floor,
            "precondition": self.precondition,
            "maxiter_cg": self.maxiter_cg,
        }


def tol_schedule_lambda(a_n: float, c_w_prev: float, j_bar: float,
                        op_norm: float, tau: float, lam: float) -> float:
    """Inner accuracy for the penalized family, the minimum of two budgets.

    Both branches are increasing in a_n and vanish with it, so a summable
    sequence forces the inner solves to tighten over the run.
    """
    if min(a_n, c_w_prev, j_bar, op_norm, lam) <= 0:
        raise ValueError("all schedule inputs must be positive")
    weight_factor = ((2.0 - tau) / (tau * j_bar)) ** (-(2.0 - tau) / tau)
    branch1 = a_n / (
        np.sqrt(2.0 * j_bar * tau) * c_w_prev
        + 2.0 * np.sqrt(2.0 * j_bar / lam) * np.sqrt(weight_factor) * op_norm
    )
    branch2 = np.sqrt(a_n) / np.sqrt(
        tau / 2.0 + op_norm**2 / (2.0 * lam) * weight_factor
    )
    return float(min(branch1, branch2))


def cg_residual_threshold_lambda(tol: float, x_prev, eps_prev: float,
                                 lam: float, tau: float) -> float:
    """Residual level below which the weighted solve error is within tol."""
    if eps_prev <= 0:
        raise ValueError("epsilon must be positive")
    x_prev = np.asarray(x_prev, dtype=float)
    max_abs = float(np.max(np.abs(x_prev), initial=0.0))
    bracket = (max_abs**2 + eps_prev**2) ** ((2.0 - tau) / 2.0)
    return float(eps_prev ** ((2.0 - tau) / 2.0) * lam * tau / bracket * tol)


def _resolve_lagrangian(cfg: LagrangianConfig, n: int, m: int) -> LagrangianConfig:
    a_seq = cfg.a_sequence
    if a_seq is None:
        a_seq = SummableSequence(scale=np.sqrt(n * m) * 1e4, ratio=0.5)
    floor = cfg.residual_floor
    if floor is None:
        floor = 1e-16 * n**1.5 * m
    return replace(cfg, a_sequence=a_seq, residual_floor=floor)


def irls_lambda_exact(op, y, cfg: LagrangianConfig, reference=None,
                      on_outer: Optional[Callable[[dict], None]] = None):
    """Penalized IRLS with exact dense solves of the normal equations."""
    return _lambda_engine(op, y, cfg, exact=True, reference=reference,
                          on_outer=on_outer, solver_name="irls-lambda")


def cg_irls_lambda(op, y, cfg: LagrangianConfig, reference=None,
                   on_outer: Optional[Callable[[dict], None]] = None):
    """CG-accelerated penalized IRLS.

    Each outer step runs CG (Jacobi-preconditioned when
    ``cfg.precondition``) on (Phi^T Phi + lambda tau diag(w)) x = Phi^T y,
    warm-started at the previous iterate and stopped by the scheduled
    residual threshold, the absolute floor, or the inner iteration cap.
    """
    name = "pcg-irls-lambda" if cfg.precondition else "cg-irls-lambda"
    if cfg.precondition and cfg.maxiter_cg is not None:
        name = "pcgm-irls-lambda"
    return _lambda_engine(op, y, cfg, exact=False, reference=reference,
                          on_outer=on_outer, solver_name=name)


def _lambda_engine(op, y, cfg, exact, reference, on_outer, solver_name):
    y = np.asarray(y, dtype=float)
    n, m = op.cols, op.rows
    cfg = _resolve_lagrangian(cfg, n, m)
    lam, tau = cfg.lam, cfg.tau

    t_pre = time.monotonic()
    if exact:
        op_norm = None
        phi = op.to_dense()
        gram = phi.T @ phi
    else:
        op_norm = estimate_extremal_singular_values(op).sigma_max
        gram_diag = op.gram_diagonal() if cfg.precondition else None
    precompute_s = time.monotonic() - t_pre

    trace = SolveTrace(solver=solver_name, config=cfg.to_dict(),
                       precompute_s=precompute_s)
    t0 = time.monotonic()

    b = op.apply_adjoint(y)
    x_prev = np.zeros(n)
    w = np.ones(n)
    eps = 1.0
    j_older = None  # J at iterate n-1
    j_last = j_tau_lambda(x_prev, w, eps, tau, lam, op, y)  # J at iterate n
    j_bar = None
    cap = cfg.maxiter_cg if cfg.maxiter_cg is not None else np.inf
    stagnant = 0
    x = x_prev

    for it in range(1, cfg.maxiter_outer + 1):
        # smoothing update precedes the solve; it only needs past iterates
        if j_older is None:
            eps_new = eps
        else:
            eps_new = update_epsilon_objective(eps, j_older, j_last, cfg.phi,
                                               cfg.alpha, it - 1)
        if cfg.eps_decay:
            eps_new = min(eps_new, _EPS_DECAY ** (it - 1) * eps)
        eps_new = max(eps_new, cfg.eps_min)

        try:
            if exact:
                a_mat = gram + np.diag(lam * tau * w)
                try:
                    x = scipy.linalg.solve(a_mat, b, assume_a="pos")
                except scipy.linalg.LinAlgError as exc:
                    raise ValueError(
                        f"normal-equations matrix not positive definite: {exc}"
                    ) from exc
                inner = 0
                tol_it = 0.0
            else:
                a_it = cfg.a_sequence.term(it)
                if it == 1:
                    # provisional budget: second branch, weight factor omitted
                    tol_it = float(np.sqrt(2.0 * a_it / tau))
                else:
                    c_w = ((float(np.max(x_prev**2, initial=0.0)) + eps**2)
                           / eps_new**2) ** (1.0 - tau / 2.0)
                    tol_it = tol_schedule_lambda(a_it, c_w, j_bar, op_norm,
                                                 tau, lam)
                thr = cg_residual_threshold_lambda(tol_it, x_prev, eps, lam, tau)
                stop = StopPredicate(
                    floor=max(thr, cfg.residual_floor),
                    predicate=lambda i, rn: i >= cap,
                )
                lam_tau_w = lam * tau * w

                def apply_a(v):
                    return op.apply_adjoint(op.apply(v)) + lam_tau_w * v

                if cfg.precondition:
                    m_inv = 1.0 / (gram_diag + lam_tau_w)
                    x, rep = pcg_solve(apply_a, m_inv, b, x0=x_prev, stop=stop,
                                       maxiter=n + 2)
                else:
                    x, rep = cg_solve(apply_a, b, x0=x_prev, stop=stop,
                                      maxiter=n + 2)
                inner = rep.iterations
        except KrylovError as exc:
            raise KrylovError(f"outer iteration {it}: {exc}") from exc

        if j_bar is None:
            j_bar = j_tau_lambda(x, np.ones(n), 1.0, tau, lam, op, y)

        w_new = update_weights(x, eps_new, tau)
        chain = (
            j_tau_lambda(x, w_new, eps_new, tau, lam, op, y),
            j_tau_lambda(x, w, eps_new, tau, lam, op, y),
            j_tau_lambda(x, w, eps, tau, lam, op, y),
            j_tau_lambda(x_prev, w, eps, tau, lam, op, y),
        )
        rel, etau = _reference_errors(x, reference, tau)
        trace.add(TraceRecord(it, time.monotonic() - t0, eps_new, tol_it, inner,
                              chain[0], rel, etau, j_chain=chain))
        if on_outer is not None:
            on_outer(dict(iteration=it, x=x, x_prev=x_prev, w=w_new, w_prev=w,
                          eps=eps_new, eps_prev=eps, tol=tol_it,
                          inner_iterations=inner, j_bar=j_bar))

        small_move = _rel_change(x, x_prev) < _STAGNATION_RTOL
        eps_unchanged = eps_new > eps * (1.0 - 1e-10)
        if small_move and it >= 2 and eps_unchanged:
            return x, trace
        if small_move and eps_new <= cfg.eps_min * (1.0 + 1e-12):
            stagnant += 1
            if stagnant >= 2:
                return x, trace
        else:
            stagnant = 0

        j_older, j_last = j_last, chain[0]
        x_prev = x
        w = w_new
        eps = eps_new
    return x, trace
