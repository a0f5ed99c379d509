"""Surrogate functionals, weight and smoothing updates, and optimality
diagnostics shared by both IRLS families.

All functions are pure; epsilon floors live in the solver configs, never
here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightState:
    """The IRLS triple (w, epsilon, tau); D = diag(1/w) is implied."""

    w: np.ndarray
    epsilon: float
    tau: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class SummableSequence:
    """Geometric sequence a_n = scale * ratio^n, or an explicit list.

    Explicit lists are indexed directly by n (provide a placeholder for
    a_0 if only n >= 1 is used); indices past the end yield 0.
    """

    scale: float = 1.0
    ratio: float = 0.5
    terms: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.terms is not None:
            object.__setattr__(self, "terms", tuple(float(t) for t in self.terms))
            if any(t < 0 for t in self.terms):
                raise ValueError("explicit terms must be nonnegative")
        else:
            if self.scale <= 0:
                raise ValueError("scale must be positive")
            if not 0 < self.ratio < 1:
                raise ValueError("ratio must lie in (0, 1)")

    def term(self, n: int) -> float:
        if self.terms is not None:
            return self.terms[n] if 0 <= n < len(self.terms) else 0.0
        return self.scale * self.ratio**n

    def tail_sum(self, start: int = 1) -> float:
        """Sum of a_n for n >= start (finite by construction)."""
        if self.terms is not None:
            return float(sum(self.terms[start:]))
        return self.scale * self.ratio**start / (1.0 - self.ratio)

    def to_dict(self) -> dict:
        if self.terms is not None:
            return {"terms": list(self.terms)}
        return {"scale": self.scale, "ratio": self.ratio}


def _core_sum(x, w, eps, tau):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ValueError("x and w must have the same shape")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    penalty = eps**2 * w + (2.0 - tau) / tau * w ** (-tau / (2.0 - tau))
    return 0.5 * tau * float(np.sum(x**2 * w) + np.sum(penalty))


def j_tau(x, w, eps: float, tau: float) -> float:
    """Surrogate (tau/2) [sum x_j^2 w_j + sum (eps^2 w_j + c(tau) w_j^-tau/(2-tau))]."""
    return _core_sum(x, w, eps, tau)


def j_tau_lambda(x, w, eps: float, tau: float, lam: float, op, y) -> float:
    """Surrogate for the penalized problem: j_tau core plus the residual term."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    res = op.apply(np.asarray(x, dtype=float)) - np.asarray(y, dtype=float)
    return _core_sum(x, w, eps, tau) + float(res @ res) / (2.0 * lam)


def objective_F(x, op, y, lam: float, tau: float) -> float:
    """||x||_tau^tau + (1/2 lambda) ||Phi x - y||_2^2."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = np.asarray(x, dtype=float)
    res = op.apply(x) - np.asarray(y, dtype=float)
    return float(np.sum(np.abs(x) ** tau) + (res @ res) / (2.0 * lam))


def f_eps_tau(x, eps: float, tau: float) -> float:
    """Smoothed quasi-norm sum (x_j^2 + eps^2)^(tau/2)."""
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    x = np.asarray(x, dtype=float)
    return float(np.sum((x**2 + eps**2) ** (tau / 2.0)))


def update_weights(x, eps: float, tau: float) -> np.ndarray:
    """w_j = (x_j^2 + eps^2)^(-(2 - tau)/2); requires eps > 0."""
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    return (x**2 + eps**2) ** (-(2.0 - tau) / 2.0)


def update_epsilon_rank(eps: float, x, k: int, beta: float) -> float:
    """min(eps, beta * r(x)_{K+1}); the plain IRLS rule is beta = 1/N."""
    x = np.asarray(x, dtype=float)
    if not 1 <= k < x.size:
        raise ValueError(f"need 1 <= K < N, got K={k}, N={x.size}")
    if beta <= 0:
        raise ValueError("beta must be positive")
    r = np.sort(np.abs(x))[::-1]
    return min(eps, beta * float(r[k]))


def update_epsilon_objective(eps: float, j_prev: float, j_curr: float,
                             phi: float, alpha: float, n: int) -> float:
    """min(eps, |J_prev - J_curr|^phi + alpha^(n+1))."""
    if phi <= 0:
        raise ValueError("phi must be positive")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return min(eps, abs(j_prev - j_curr) ** phi + alpha ** (n + 1))


def lasso_optimality_residual(x, op, y, lam: float, zero_tol: float = 0.0) -> float:
    """Max violation of the l1 subgradient conditions at x.

    With g = Phi^T (y - Phi x): a nonzero coordinate must satisfy
    g_j = lambda sign(x_j); a zero coordinate must satisfy |g_j| <= lambda.
    Entries with |x_j| <= zero_tol are treated as zero, which matters for
    solvers that only drive coordinates to the smoothing floor.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = np.asarray(x, dtype=float)
    g = op.apply_adjoint(np.asarray(y, dtype=float) - op.apply(x))
    nonzero = np.abs(x) > zero_tol
    viol = np.where(
        nonzero,
        np.abs(g - lam * np.sign(x)),
        np.maximum(0.0, np.abs(g) - lam),
    )
    return float(viol.max(initial=0.0))


def power_transform(x, zeta: float) -> np.ndarray:
    """Componentwise sign(x_j) |x_j|^zeta."""
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** zeta


def power_transform_inverse(x, zeta: float) -> np.ndarray:
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    return power_transform(x, 1.0 / zeta)


def critical_point_residual_tau(x, op, y, lam: float, tau: float,
                                upsilon: float = 2.0,
                                zero_tol: float = 0.0) -> float:
    """Stationarity violation of the power-transformed penalized objective.

    Writing xb for the inverse transform of x with exponent upsilon/tau,
    each nonzero component must satisfy
        (upsilon/tau) |xb_j|^((upsilon-tau)/tau) (Phi^T(Phi x - y))_j
        + lambda upsilon sign(xb_j) |xb_j|^(upsilon-1) = 0;
    zero components (|x_j| <= zero_tol) are trivially satisfied and
    contribute 0.  Returns the max absolute violation.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1) for the transformed residual")
    if not 1 < upsilon <= 2:
        raise ValueError("upsilon must lie in (1, 2]")
    x = np.asarray(x, dtype=float)
    xb = power_transform_inverse(x, upsilon / tau)
    neg_g = op.apply_adjoint(op.apply(x) - np.asarray(y, dtype=float))
    axb = np.abs(xb)
    resid = (
        upsilon / tau * axb ** ((upsilon - tau) / tau) * neg_g
        + lam * upsilon * np.sign(xb) * axb ** (upsilon - 1.0)
    )
    resid[np.abs(x) <= zero_tol] = 0.0
    return float(np.abs(resid).max(initial=0.0))
