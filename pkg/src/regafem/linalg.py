"""Sparse direct solves, regularized normal equations and spectral norm estimates."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    """Raised when a linear system cannot be solved to the required accuracy."""


def _inf_norm(M) -> float:
    if M.shape[0] == 0:
        return 0.0
    return float(abs(M).sum(axis=1).max())


class Factorization:
    """Sparse LU factorization of a square matrix, reusable for several right-hand sides."""

    def __init__(self, M):
        M = sp.csc_matrix(M, dtype=float)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"matrix must be square, got {M.shape}")
        self.matrix = M
        self.norm = _inf_norm(M)
        if M.shape[0] == 0:
            self._lu = None
            return
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                self._lu = spla.splu(M)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SingularSystemError(str(exc)) from exc
        udiag = np.abs(self._lu.U.diagonal())
        if udiag.size and (not np.all(np.isfinite(udiag))
                           or udiag.min() <= 1e-14 * max(udiag.max(), 1e-300)):
            raise SingularSystemError("matrix is numerically singular")

    def solve(self, b, trans: str = "N") -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape != (self.matrix.shape[0],):
            raise ValueError(f"right-hand side has shape {b.shape}, expected ({self.matrix.shape[0]},)")
        if self._lu is None:
            return np.zeros(0)
        op = self.matrix if trans == "N" else self.matrix.T
        x = self._lu.solve(b, trans=trans)
        for _ in range(2):
            if not np.all(np.isfinite(x)):
                break
            r = b - op @ x
            bound = 1e-8 * (self.norm * np.abs(x).max() + np.abs(b).max())
            if np.abs(r).max() <= bound:
                return x
            x = x + self._lu.solve(r, trans=trans)
        raise SingularSystemError("direct solve failed to reach the residual bound")


def direct_solve(M, b) -> np.ndarray:
    """Solve ``M x = b`` with sparse LU; raises SingularSystemError on breakdown."""
    return Factorization(M).solve(b)


def normal_system(A, R, alpha: float) -> sp.csr_matrix:
    """alpha R^T R + A^T A."""
    if A.shape[1] != R.shape[1]:
        raise ValueError(f"column mismatch: A {A.shape}, R {R.shape}")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    A = sp.csr_matrix(A)
    R = sp.csr_matrix(R)
    M = (A.T @ A).tocsr()
    if alpha > 0:
        M = M + alpha * (R.T @ R)
    M = sp.csr_matrix(M)
    # symmetrize exactly; the two triangles differ only by summation order
    return ((M + M.T) * 0.5).tocsr()


def normal_rhs(A, F) -> np.ndarray:
    return sp.csr_matrix(A).T @ np.asarray(F, dtype=float)


def operator_norm(M, tol: float = 1e-3, maxiter: int = 500, seed: int = 0):
    """Spectral norm estimate by power iteration on M^T M.

    ``M`` may be a sparse/dense matrix or a ``LinearOperator`` supporting
    ``rmatvec``.  Returns ``(estimate, converged)``.
    """
    op = spla.aslinearoperator(M)
    n = op.shape[1]
    if n == 0:
        return 0.0, True
    x = np.random.default_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(maxiter):
        y = op.rmatvec(op.matvec(x))
        lam = np.linalg.norm(y)
        if lam == 0.0:
            return 0.0, True
        new_sigma = np.sqrt(lam)
        x = y / lam
        if abs(new_sigma - sigma) <= tol * new_sigma * 1e-2:
            return float(new_sigma), True
        sigma = new_sigma
    return float(sigma), False


def regularization_factor(A, R, alpha: float, tol: float = 1e-3, factor: Factorization | None = None):
    """J = ||(alpha R + A)^{-1} (alpha R)||_2, estimated by power iteration."""
    if alpha == 0.0 or R.nnz == 0:
        return 0.0, True
    aR = (alpha * sp.csr_matrix(R)).tocsr()
    if factor is None:
        factor = Factorization(aR + A)
    n = A.shape[0]
    op = spla.LinearOperator(
        (n, n),
        matvec=lambda v: factor.solve(aR @ v),
        rmatvec=lambda v: aR.T @ factor.solve(v, trans="T"),
        dtype=float,
    )
    return operator_norm(op, tol=tol)
