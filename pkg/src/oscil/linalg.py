"""Dense real linear algebra used by the integrators.

Thin contracts over LAPACK (via numpy/scipy): LU with partial pivoting,
symmetric eigendecomposition, the minimum eigenvalue modulus of a small
nonsymmetric matrix, the spectral norm, and block (Kronecker) products
that never assemble ``M kron I``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class LinAlgError(ValueError):
    pass


class SingularMatrix(LinAlgError):
    pass


class DimensionMismatch(LinAlgError):
    pass


class NotSymmetric(LinAlgError):
    pass


PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class LUFactorization:
    """Packed ``L\\U`` factors and LAPACK pivot indices of a square matrix."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]


@dataclass(frozen=True)
class SymEig:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # orthogonal, columns

    def apply(self, fvals: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Return ``Q diag(fvals) Q^T v``."""
        Q = self.eigenvectors
        return Q @ (fvals * (Q.T @ v))

    def matrix(self, fvals: np.ndarray) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * fvals) @ Q.T


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise LinAlgError("matrix has non-finite entries")
    return M


def lu_factor(M) -> LUFactorization:
    M = _as_square(M)
    with warnings.catch_warnings():
        # Exactly singular input is reported below as SingularMatrix.
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    if M.size and np.min(np.abs(np.diag(lu))) < PIVOT_FLOOR:
        raise SingularMatrix("zero pivot in LU factorization")
    return LUFactorization(lu, piv)


def lu_solve(F: LUFactorization, b) -> np.ndarray:
    """Solve ``M x = b``; ``b`` may be a vector or a matrix of columns."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, matrix is {F.n}x{F.n}")
    return scipy.linalg.lu_solve((F.lu, F.piv), b, check_finite=False)


def sym_eig(M, rtol: float = 1e-12) -> SymEig:
    M = _as_square(M)
    scale = max(np.max(np.abs(M)), 1.0) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > rtol * scale:
        raise NotSymmetric("matrix is not symmetric")
    w, Q = np.linalg.eigh(0.5 * (M + M.T))
    return SymEig(w, Q)


def small_eigenvalue_min_modulus(M) -> float:
    """Smallest modulus over the (possibly complex) spectrum of ``M``."""
    M = _as_square(M)
    return float(np.min(np.abs(np.linalg.eigvals(M))))


def spectral_norm(M) -> float:
    M = _as_square(M)
    return float(np.linalg.norm(M, 2))


def kron_apply(M, v) -> np.ndarray:
    """Compute ``(M kron I_n) v`` for ``v`` made of ``s`` stacked blocks.

    ``v`` is accepted either flat (length ``s*n``) or as an ``(s, n)`` array;
    the result has the same layout as the input.
    """
    M = np.asarray(M, dtype=float)
    v = np.asarray(v, dtype=float)
    s = M.shape[1]
    if v.ndim == 2:
        if v.shape[0] != s:
            raise DimensionMismatch(f"{v.shape[0]} blocks for a {M.shape} matrix")
        return M @ v
    if v.size % s:
        raise DimensionMismatch(f"length {v.size} is not a multiple of {s}")
    return (M @ v.reshape(s, -1)).ravel()
