"""Convex quadratic program solver for the tracking controller.

Standard form:

    minimize   0.5 z' P z + q' z
    subject to l <= A z <= u        (infinite bounds allowed)

solved by operator-splitting ADMM with a fixed-pattern sparse KKT
factorization, vectorized per-row penalties, residual balancing every 25
iterations, warm starting, and primal-infeasibility certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["QuadraticProgram", "QPSolution", "solve"]

_SIGMA = 1e-6
_ALPHA = 1.6
_RHO0 = 0.1
_RHO_EQ_SCALE = 1e3
_BALANCE_EVERY = 25
_RHO_TOL_FACTOR = 5.0


@dataclass
class QuadraticProgram:
    """Problem data. P must be symmetric positive semidefinite."""

    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        if not isinstance(self.P, sp.csc_matrix):
            self.P = sp.csc_matrix(self.P)
        if not isinstance(self.A, sp.csc_matrix):
            self.A = sp.csc_matrix(self.A)
        self.q = np.asarray(self.q, dtype=float).ravel()
        self.l = np.asarray(self.l, dtype=float).ravel()
        self.u = np.asarray(self.u, dtype=float).ravel()
        n = self.P.shape[0]
        m = self.A.shape[0]
        if self.P.shape != (n, n) or self.A.shape[1] != n:
            raise ValueError("inconsistent dimensions")
        if self.q.shape != (n,) or self.l.shape != (m,) or self.u.shape != (m,):
            raise ValueError("inconsistent vector lengths")
        if np.any(self.l > self.u):
            raise ValueError("l must be <= u elementwise")

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass
class QPSolution:
    z: np.ndarray
    y: np.ndarray
    status: str  # solved | max-iter | infeasible-detected
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float = field(default=float("nan"))


_DENSE_MAX_N = 600


def _initial_rho(qp: QuadraticProgram) -> np.ndarray:
    rho = np.full(qp.m, _RHO0)
    eq = (qp.u - qp.l) < 1e-10
    rho[eq] *= _RHO_EQ_SCALE
    return rho


class _KKTSparse:
    """Sparse LU of the full KKT system; returns (x_tilde, nu)."""

    def __init__(self, qp, rho):
        n = qp.n
        kkt = sp.bmat(
            [
                [qp.P + _SIGMA * sp.identity(n), qp.A.T],
                [qp.A, -sp.diags(1.0 / rho)],
            ],
            format="csc",
        )
        self._lu = spla.splu(kkt)
        self._n = n

    def solve(self, qp, rho, x, zproj, y):
        rhs = np.concatenate([_SIGMA * x - qp.q, zproj - y / rho])
        sol = self._lu.solve(rhs)
        x_tilde = sol[: self._n]
        z_tilde = zproj + (sol[self._n :] - y) / rho
        return x_tilde, z_tilde


class _KKTDense:
    """Dense Cholesky of the reduced system P + sigma I + A' rho A; much
    faster than sparse LU at control-loop problem sizes."""

    def __init__(self, qp, rho):
        mat = qp.P.toarray()
        mat[np.diag_indices_from(mat)] += _SIGMA
        if qp.m:
            scaled = qp.A.copy()
            scaled.data = scaled.data * rho[scaled.indices]  # csc: row scale
            mat += (qp.A.T @ scaled).toarray()
        self._cho = scipy.linalg.cho_factor(mat, check_finite=False)

    def solve(self, qp, rho, x, zproj, y):
        rhs = _SIGMA * x - qp.q
        if qp.m:
            rhs = rhs + qp.A.T @ (rho * zproj - y)
        x_tilde = scipy.linalg.cho_solve(self._cho, rhs, check_finite=False)
        z_tilde = qp.A @ x_tilde
        return x_tilde, z_tilde


def _factor(qp: QuadraticProgram, rho: np.ndarray):
    if qp.n <= _DENSE_MAX_N:
        return _KKTDense(qp, rho)
    return _KKTSparse(qp, rho)


def _residuals(qp, z, zproj, y):
    ax = qp.A @ z
    r_prim = np.linalg.norm(ax - zproj, np.inf) if qp.m else 0.0
    r_dual = np.linalg.norm(qp.P @ z + qp.q + qp.A.T @ y, np.inf)
    prim_scale = max(
        np.linalg.norm(ax, np.inf) if qp.m else 0.0,
        np.linalg.norm(zproj, np.inf) if qp.m else 0.0,
        1.0,
    )
    dual_scale = max(
        np.linalg.norm(qp.P @ z, np.inf),
        np.linalg.norm(qp.A.T @ y, np.inf) if qp.m else 0.0,
        np.linalg.norm(qp.q, np.inf),
        1.0,
    )
    return r_prim, r_dual, prim_scale, dual_scale


def _primal_infeasible(qp, dy, tol) -> bool:
    """OSQP-style certificate: dy with A'dy ~ 0 and support below zero."""
    norm_dy = np.linalg.norm(dy, np.inf)
    if norm_dy < tol:
        return False
    dy = dy / norm_dy
    if np.linalg.norm(qp.A.T @ dy, np.inf) > tol:
        return False
    u_term = np.where(np.isfinite(qp.u), qp.u, 0.0) @ np.maximum(dy, 0.0)
    l_term = np.where(np.isfinite(qp.l), qp.l, 0.0) @ np.minimum(dy, 0.0)
    if np.any(~np.isfinite(qp.u) & (dy > tol)) or np.any(~np.isfinite(qp.l) & (dy < -tol)):
        return False
    return u_term + l_term < -tol


def solve(
    qp: QuadraticProgram,
    warm=None,
    tol_primal: float = 1e-4,
    tol_dual: float = 1e-4,
    max_iter: int = 4000,
) -> QPSolution:
    """Run ADMM to first-order optimality. Deterministic for fixed inputs.

    `warm` is an optional (z, y) pair, typically the previous solution of a
    perturbed problem.
    """
    n, m = qp.n, qp.m
    rho = _initial_rho(qp)
    lu = _factor(qp, rho)

    if warm is not None:
        z = np.array(warm[0], dtype=float)
        y = np.array(warm[1], dtype=float)
        zproj = np.clip(qp.A @ z, qp.l, qp.u)
    else:
        z = np.zeros(n)
        y = np.zeros(m)
        zproj = np.zeros(m)

    r_prim = r_dual = np.inf
    y_prev_cert = y.copy()
    status = "max-iter"
    it = 0
    for it in range(1, max_iter + 1):
        x_tilde, z_tilde = lu.solve(qp, rho, z, zproj, y)

        z = _ALPHA * x_tilde + (1.0 - _ALPHA) * z
        z_candidate = _ALPHA * z_tilde + (1.0 - _ALPHA) * zproj
        zproj_new = np.clip(z_candidate + y / rho, qp.l, qp.u)
        y = y + rho * (z_candidate - zproj_new)
        zproj = zproj_new

        if it % _BALANCE_EVERY == 0 or it == max_iter:
            r_prim, r_dual, prim_scale, dual_scale = _residuals(qp, z, zproj, y)
            if r_prim <= tol_primal * prim_scale and r_dual <= tol_dual * dual_scale:
                status = "solved"
                break
            if m and _primal_infeasible(qp, y - y_prev_cert, 1e-10):
                status = "infeasible-detected"
                break
            y_prev_cert = y.copy()
            # residual balancing with refactorization when rho moves far
            ratio = np.sqrt((r_prim / max(prim_scale, 1e-12)) / max(r_dual / max(dual_scale, 1e-12), 1e-12))
            ratio = float(np.clip(ratio, 1e-4, 1e4))
            if ratio > _RHO_TOL_FACTOR or ratio < 1.0 / _RHO_TOL_FACTOR:
                rho = np.clip(rho * ratio, 1e-6, 1e6)
                lu = _factor(qp, rho)

    r_prim, r_dual, _, _ = _residuals(qp, z, zproj, y)
    obj = 0.5 * z @ (qp.P @ z) + qp.q @ z
    return QPSolution(
        z=z,
        y=y,
        status=status,
        iterations=it,
        primal_residual=float(r_prim),
        dual_residual=float(r_dual),
        objective=float(obj),
    )
