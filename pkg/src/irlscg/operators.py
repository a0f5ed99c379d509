"""Measurement operators with forward/adjoint application.

All operators are real-valued and immutable after construction, so a single
instance may be applied concurrently from many solver runs.  The partial
DCT operator applies in O(N log N) through the fast cosine transform; a
dense materialization (``to_dense``) is kept for verification at small
sizes.
"""

from __future__ import annotations

import json
from typing import NamedTuple

import numpy as np
from scipy.fft import dct, idct


class LinearOperator:
    """Abstract m x N real linear map.

    Subclasses provide ``apply`` (R^N -> R^m) and ``apply_adjoint``
    (R^m -> R^N).  Calling the operator is a synonym for ``apply``.
    """

    rows: int
    cols: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def to_dense(self) -> np.ndarray:
        """Materialize the matrix, row by row via adjoint applications."""
        out = np.empty((self.rows, self.cols))
        e = np.zeros(self.rows)
        for i in range(self.rows):
            e[i] = 1.0
            out[i] = self.apply_adjoint(e)
            e[i] = 0.0
        return out

    def gram_diagonal(self) -> np.ndarray:
        """diag(Phi^T Phi), i.e. squared column norms."""
        d = np.zeros(self.cols)
        e = np.zeros(self.rows)
        for i in range(self.rows):
            e[i] = 1.0
            d += self.apply_adjoint(e) ** 2
            e[i] = 0.0
        return d

    def spec(self) -> dict:
        raise NotImplementedError


class DenseOperator(LinearOperator):
    """Operator backed by an explicit matrix."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        matrix = matrix.copy()
        matrix.setflags(write=False)
        self.matrix = matrix
        self.rows, self.cols = matrix.shape

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def apply_adjoint(self, y):
        return self.matrix.T @ np.asarray(y, dtype=float)

    def to_dense(self):
        return np.array(self.matrix)

    def gram_diagonal(self):
        return (self.matrix**2).sum(axis=0)

    def spec(self):
        return {
            "kind": "dense",
            "N": self.cols,
            "m": self.rows,
            "values": self.matrix.tolist(),
        }


def dct_full_entry(i: int, j: int, n: int) -> float:
    """Entry (i, j), 1-based, of the non-normalized N x N cosine matrix.

    Row 1 is constant 1; row i >= 2 is sqrt(2) cos(pi (2j-1)(i-1) / (2N)).
    Dividing the matrix by sqrt(N) gives an orthonormal basis.
    """
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"index ({i}, {j}) out of range for dimension {n}")
    if i == 1:
        return 1.0
    return float(np.sqrt(2.0) * np.cos(np.pi * (2 * j - 1) * (i - 1) / (2 * n)))


class PartialDCTOperator(LinearOperator):
    """Row-sampled normalized cosine matrix with fast application.

    ``apply`` runs a full orthonormal DCT-II and keeps the sampled rows;
    ``apply_adjoint`` zero-fills and runs the inverse transform.  Rows of
    the normalized full matrix are orthonormal, hence Phi Phi^T = I_m.
    """

    def __init__(self, n: int, row_indices: np.ndarray, seed: int | None = None):
        rows = np.asarray(row_indices, dtype=np.intp)
        if rows.ndim != 1:
            raise ValueError("row_indices must be 1-D")
        if len(np.unique(rows)) != rows.size:
            raise ValueError("row indices must be distinct")
        if rows.size > n or rows.min(initial=0) < 0 or rows.max(initial=0) >= n:
            raise ValueError("row indices out of range")
        rows = np.sort(rows)
        rows.setflags(write=False)
        self.row_indices = rows
        self.rows = int(rows.size)
        self.cols = int(n)
        self.seed = seed

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return dct(x, norm="ortho")[self.row_indices]

    def apply_adjoint(self, y):
        z = np.zeros(self.cols)
        z[self.row_indices] = np.asarray(y, dtype=float)
        return idct(z, norm="ortho")

    def to_dense(self):
        # row i of the normalized full matrix, restricted to the sample set
        out = np.empty((self.rows, self.cols))
        j = np.arange(1, self.cols + 1)
        for r, i0 in enumerate(self.row_indices):
            i = int(i0) + 1
            if i == 1:
                out[r] = 1.0
            else:
                out[r] = np.sqrt(2.0) * np.cos(
                    np.pi * (2 * j - 1) * (i - 1) / (2 * self.cols)
                )
        return out / np.sqrt(self.cols)

    def gram_diagonal(self, chunk: int = 64):
        n = self.cols
        j = np.arange(1, n + 1)
        d = np.zeros(n)
        idx = np.asarray(self.row_indices)
        if 0 in idx:
            d += 1.0 / n
        hi = idx[idx > 0]
        for s in range(0, hi.size, chunk):
            block = hi[s : s + chunk]
            ang = np.pi * np.outer(block, 2 * j - 1) / (2 * n)  # (i-1) == block
            d += (2.0 / n) * (np.cos(ang) ** 2).sum(axis=0)
        return d

    def spec(self):
        spec = {"kind": "partial_dct", "N": self.cols, "m": self.rows}
        if self.seed is not None:
            spec["seed"] = int(self.seed)
        else:
            spec["rows"] = [int(r) for r in self.row_indices]
        return spec


class DiagonalScaledOperator(LinearOperator):
    """Composite ``base @ diag(scale)`` used for weighted least squares."""

    def __init__(self, base: LinearOperator, scale: np.ndarray):
        scale = np.asarray(scale, dtype=float)
        if scale.shape != (base.cols,):
            raise ValueError("scale length must match operator columns")
        if not np.all(np.isfinite(scale)):
            raise ValueError("scale must be finite")
        scale = scale.copy()
        scale.setflags(write=False)
        self.base = base
        self.scale = scale
        self.rows = base.rows
        self.cols = base.cols

    def apply(self, x):
        return self.base.apply(self.scale * np.asarray(x, dtype=float))

    def apply_adjoint(self, y):
        return self.scale * self.base.apply_adjoint(y)

    def gram_diagonal(self):
        return self.scale**2 * self.base.gram_diagonal()

    def spec(self):
        return {"kind": "diagonal_scaled", "base": self.base.spec(),
                "scale": self.scale.tolist()}


def make_partial_dct(n: int, m: int, seed: int) -> PartialDCTOperator:
    """Sample m distinct rows of the normalized DCT uniformly at random.

    Deterministic for a given seed (PCG64); sampling is without
    replacement so the rows stay orthonormal.
    """
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= N, got m={m}, N={n}")
    rng = np.random.default_rng(seed)
    rows = rng.permutation(n)[:m]
    return PartialDCTOperator(n, rows, seed=seed)


def operator_spec(op: LinearOperator) -> dict:
    return op.spec()


def operator_from_spec(spec: dict) -> LinearOperator:
    kind = spec.get("kind")
    if kind == "partial_dct":
        if "seed" in spec:
            return make_partial_dct(spec["N"], spec["m"], spec["seed"])
        return PartialDCTOperator(spec["N"], np.asarray(spec["rows"]))
    if kind == "dense":
        if "values" in spec:
            return DenseOperator(np.asarray(spec["values"], dtype=float))
        if "csv" in spec:
            return DenseOperator(load_dense_csv(spec["csv"]))
        raise ValueError("dense spec needs 'values' or 'csv'")
    if kind == "diagonal_scaled":
        return DiagonalScaledOperator(
            operator_from_spec(spec["base"]), np.asarray(spec["scale"])
        )
    raise ValueError(f"unknown operator kind: {kind!r}")


def save_dense_csv(path, matrix: np.ndarray) -> None:
    """Headerless row-major CSV."""
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


def load_dense_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_operator_json(path, op: LinearOperator) -> None:
    with open(path, "w") as fh:
        json.dump(operator_spec(op), fh, sort_keys=True)
        fh.write("\n")


def load_operator_json(path) -> LinearOperator:
    with open(path) as fh:
        return operator_from_spec(json.load(fh))


class SpectralEstimate(NamedTuple):
    sigma_max: float
    sigma_min: float
    converged: bool


def estimate_extremal_singular_values(
    op: LinearOperator, tol: float = 1e-8, maxiter: int = 500
) -> SpectralEstimate:
    """Extremal singular values of the operator via its m x m Gram matrix.

    For m <= 64 the Gram matrix Phi Phi^T is materialized and solved
    exactly; otherwise sigma_max comes from power iteration and sigma_min
    from a shifted power iteration, each stopping at relative change
    ``tol``.  Non-convergence returns the best estimate with
    ``converged=False``.
    """
    m = op.rows

    def gram_apply(v):
        return op.apply(op.apply_adjoint(v))

    if m <= 64:
        g = np.empty((m, m))
        e = np.zeros(m)
        for i in range(m):
            e[i] = 1.0
            g[:, i] = gram_apply(e)
            e[i] = 0.0
        ev = np.linalg.eigvalsh(0.5 * (g + g.T))
        ev = np.clip(ev, 0.0, None)
        return SpectralEstimate(float(np.sqrt(ev[-1])), float(np.sqrt(ev[0])), True)

    rng = np.random.default_rng(0)

    def power(apply_fn):
        v = rng.standard_normal(m)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(maxiter):
            w = apply_fn(v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0, True
            lam_new = float(v @ w)
            v = w / nw
            if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
                return lam_new, True
            lam = lam_new
        return lam, False

    lam_max, ok_max = power(gram_apply)
    shift = 1.01 * lam_max

    def shifted(v):
        return shift * v - gram_apply(v)

    mu_max, ok_min = power(shifted)
    lam_min = max(shift - mu_max, 0.0)
    return SpectralEstimate(
        float(np.sqrt(max(lam_max, 0.0))), float(np.sqrt(lam_min)), ok_max and ok_min
    )
