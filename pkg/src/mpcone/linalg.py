"""Dense linear-algebra kernels used by every other module.

Matrices are plain ``numpy.ndarray`` objects in row-major layout; vectors are
one-dimensional arrays.  Everything here is small and dense by design: the
problems this package targets have a handful of rows and columns, so we lean
on LAPACK (through numpy/scipy) rather than hand-rolled iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, Singular

__all__ = [
    "SpdFactor",
    "factor_spd",
    "sym_eig",
    "rank",
    "solve_symmetric_indefinite",
    "require_symmetric",
]

DEFAULT_RANK_TOL = 1e-9


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got array of ndim {a.ndim}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch("matrix entries must be finite")
    return a


def require_symmetric(m, rtol: float = 1e-12) -> np.ndarray:
    """Return ``m`` as an array, raising if it is not square symmetric."""
    a = _as_matrix(m)
    n, k = a.shape
    if n != k:
        raise DimensionMismatch(f"expected a square matrix, got {n}x{k}")
    scale = max(1.0, float(np.abs(a).max()) if a.size else 1.0)
    if n and float(np.abs(a - a.T).max()) > rtol * scale:
        raise DimensionMismatch("matrix is not symmetric within tolerance")
    return a


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix."""

    dimension: int
    lower: np.ndarray
    permutation: np.ndarray  # identity; kept so callers can assume a pivot order

    def solve(self, rhs) -> np.ndarray:
        """Solve ``m @ x = rhs`` using the stored factor."""
        b = np.asarray(rhs, dtype=float)
        if b.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"rhs of length {b.shape[0]} against factor of dimension {self.dimension}"
            )
        z = scipy.linalg.solve_triangular(self.lower, b, lower=True)
        return scipy.linalg.solve_triangular(self.lower.T, z, lower=False)

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def factor_spd(m) -> SpdFactor:
    """Cholesky-factor a symmetric positive definite matrix.

    Raises NotPositiveDefinite as soon as a pivot drops to or below
    ``n * 1e-13 * max(diagonal)``.
    """
    a = require_symmetric(m)
    n = a.shape[0]
    lower = np.zeros_like(a)
    threshold = n * 1e-13 * (float(a.diagonal().max()) if n else 0.0)
    work = a.copy()
    for j in range(n):
        pivot = work[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= threshold:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at column {j} is below threshold {threshold:.3e}"
            )
        ljj = np.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1 :, j] = (work[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / ljj
    return SpdFactor(dimension=n, lower=lower, permutation=np.arange(n))


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as orthonormal columns.
    """
    a = require_symmetric(m)
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure is rare
        raise NoConvergence(str(exc)) from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def rank(m, tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank via column-pivoted QR.

    Counts pivots of magnitude above ``tol`` times the largest pivot.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _as_matrix(m)
    if a.size == 0:
        return 0
    r = scipy.linalg.qr(a, mode="r", pivoting=True)[0]
    pivots = np.abs(np.diag(r))
    if pivots.size == 0 or pivots.max() == 0.0:
        return 0
    return int(np.count_nonzero(pivots > tol * pivots.max()))


def solve_symmetric_indefinite(m, rhs) -> np.ndarray:
    """Solve a symmetric (possibly indefinite) linear system.

    One step of iterative refinement is applied; the residual contract is
    ``|m x - rhs| <= 1e-8 (|m| |x| + |rhs|)``.
    """
    a = require_symmetric(m)
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch("rhs length does not match matrix dimension")
    try:
        x = np.linalg.solve(a, b)
        x = x + np.linalg.solve(a, b - a @ x)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from exc
    norm_a = float(np.linalg.norm(a))
    resid = float(np.linalg.norm(a @ x - b))
    if not np.all(np.isfinite(x)) or resid > 1e-8 * (
        norm_a * float(np.linalg.norm(x)) + float(np.linalg.norm(b)) + 1e-300
    ):
        raise Singular(f"residual {resid:.3e} indicates a numerically singular system")
    return x
