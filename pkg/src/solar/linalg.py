"""Dense linear-algebra kernels shared by every other module.

All math runs in float64; precision loss is confined to the explicit
quantization step at serialization time.  The SVD carries a canonical sign
convention so that two parties factoring the same matrix agree bitwise —
without it, sender and receiver could hold ``(U, V)`` pairs differing by
column sign flips and silently reconstruct garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

__all__ = [
    "SvdFactors",
    "as_matrix",
    "svd_full",
    "solve_least_squares",
    "orthonormalize",
    "frobenius_norm",
    "matmul",
]


def as_matrix(x, name: str = "matrix") -> NDArray[np.float64]:
    """Validate and return ``x`` as a finite 2-D float64 C-order array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _canonicalize_signs(
    U: NDArray[np.float64], V: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Flip column signs so the largest-|entry| element of each U column is
    non-negative (ties by lowest row index), flipping the paired V column to
    preserve the product.  Unpaired columns (beyond min(m, n)) multiply no
    singular value and are canonicalized independently by the same rule."""
    U = U.copy()
    V = V.copy()
    k = min(U.shape[1], V.shape[1])

    def pivot_sign(col: NDArray[np.float64]) -> float:
        pivot = int(np.argmax(np.abs(col)))  # argmax takes the lowest index on ties
        return -1.0 if col[pivot] < 0 else 1.0

    for j in range(k):
        s = pivot_sign(U[:, j])
        if s < 0:
            U[:, j] = -U[:, j]
            V[:, j] = -V[:, j]
    for j in range(k, U.shape[1]):
        if pivot_sign(U[:, j]) < 0:
            U[:, j] = -U[:, j]
    for j in range(k, V.shape[1]):
        if pivot_sign(V[:, j]) < 0:
            V[:, j] = -V[:, j]
    return U, V


@dataclass(frozen=True)
class SvdFactors:
    """Full SVD ``W = U @ diag(sigma) @ V.T`` with canonical column signs.

    U is m x m, V is n x n, sigma has length min(m, n), non-increasing.
    """

    U: NDArray[np.float64]
    sigma: NDArray[np.float64]
    V: NDArray[np.float64]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def reconstruct(self) -> NDArray[np.float64]:
        """Return ``U @ diag(sigma) @ V.T`` (shape m x n)."""
        m, n = self.m, self.n
        k = len(self.sigma)
        return (self.U[:, :k] * self.sigma) @ self.V[:, :k].T


def svd_full(W) -> SvdFactors:
    """Full SVD of ``W`` with square U, V and canonical signs.

    Deterministic: identical inputs produce bitwise-identical factors (LAPACK
    is deterministic per platform; the sign fix-up removes the remaining
    column-sign freedom).
    """
    W = as_matrix(W, "W")
    if W.size == 0:
        raise ValueError("W must be non-empty")
    try:
        U, s, Vt = np.linalg.svd(W, full_matrices=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise ValueError(f"SVD did not converge: {exc}") from exc
    U, V = _canonicalize_signs(U, Vt.T)
    return SvdFactors(U=U, sigma=s, V=V)


def solve_least_squares(
    design,
    target,
    ridge: float = 0.0,
    info: dict | None = None,
) -> NDArray[np.float64]:
    """Minimize ``||design @ x - target||^2 + ridge * ||x||^2``.

    Solved through the q x q Gram system with a symmetric (Cholesky)
    factorization: q is the pool size (at most a few thousand) while the row
    count r*n can be much larger, so the normal equations are the cheap side.
    If the factorization fails or the normal-equation residual exceeds 1e-8
    relative, the solve retries once with ridge 1e-10 * trace(Gram)/q; pass an
    ``info`` dict to observe ``effective_ridge`` and ``fallback``.
    """
    D = as_matrix(design, "design")
    t = np.ascontiguousarray(target, dtype=np.float64).ravel()
    if D.shape[0] != t.shape[0]:
        raise ValueError(
            f"design has {D.shape[0]} rows but target has {t.shape[0]} entries"
        )
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    if D.shape[1] == 0:
        if info is not None:
            info["effective_ridge"] = ridge
            info["fallback"] = False
        return np.zeros(0)

    gram = D.T @ D
    rhs = D.T @ t
    q = D.shape[1]
    rhs_scale = float(np.linalg.norm(rhs))

    def attempt(lam: float) -> NDArray[np.float64] | None:
        try:
            cho = scipy.linalg.cho_factor(
                gram + lam * np.eye(q), lower=True, check_finite=False
            )
            x = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
        except scipy.linalg.LinAlgError:
            return None
        # normal-equation residual check guards against a factorization that
        # "succeeded" on a numerically singular Gram matrix
        resid = np.linalg.norm(gram @ x + lam * x - rhs)
        if resid > 1e-8 * max(rhs_scale, 1e-300):
            return None
        return x

    x = attempt(ridge)
    fallback = False
    effective = ridge
    if x is None:
        fallback = True
        effective = ridge + 1e-10 * float(np.trace(gram)) / q
        x = attempt(effective)
        if x is None:
            # last resort: SVD-based solve of the regularized system
            x, *_ = np.linalg.lstsq(
                gram + effective * np.eye(q), rhs, rcond=None
            )
    if info is not None:
        info["effective_ridge"] = effective
        info["fallback"] = fallback
    return x


def orthonormalize(Y, tol: float | None = None) -> NDArray[np.float64]:
    """Orthonormal basis for the significant column span of ``Y``.

    Columns come from the SVD of Y restricted to singular values above
    ``tol`` (default: sigma_max * max(shape) * machine epsilon, the usual
    numerical-rank cutoff), sign-canonicalized for determinism.  A zero
    matrix yields an m x 0 result.
    """
    Y = as_matrix(Y, "Y")
    if Y.shape[1] == 0:
        return np.zeros((Y.shape[0], 0))
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    if tol is None:
        tol = float(s[0]) * max(Y.shape) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    Q = U[:, :rank].copy()
    for j in range(rank):
        pivot = int(np.argmax(np.abs(Q[:, j])))
        if Q[pivot, j] < 0:
            Q[:, j] = -Q[:, j]
    return Q


def frobenius_norm(X) -> float:
    """sqrt of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(X, dtype=np.float64)))


def matmul(X, Y) -> NDArray[np.float64]:
    """Shape-checked matrix product (deterministic for identical inputs on a
    given platform)."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[0]:
        raise ValueError(f"cannot multiply shapes {X.shape} and {Y.shape}")
    return X @ Y
