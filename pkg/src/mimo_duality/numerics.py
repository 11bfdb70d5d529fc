"""Deterministic matrix decompositions and linear solvers.

The decompositions wrap LAPACK through :mod:`numpy.linalg` and add the
ordering and phase conventions the dualities rely on for reproducible
output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    DimensionError,
    NonFiniteError,
    NotHermitianError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from .model import STRUCT_RTOL

__all__ = [
    "HermitianEigen",
    "CholeskyFactor",
    "ReducedSvd",
    "hermitian_eig",
    "cholesky",
    "reduced_svd",
    "solve_block_upper_triangular",
    "solve_lu",
    "hermitian_part",
    "RANK_RTOL",
]

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class HermitianEigen:
    basis: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class CholeskyFactor:
    L: np.ndarray


@dataclass(frozen=True)
class ReducedSvd:
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.D.shape[0]


def _square(A, name="matrix") -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return A


def hermitian_part(A: np.ndarray) -> np.ndarray:
    """Return ``(A + A^H) / 2``."""
    return 0.5 * (A + A.conj().T)


def _check_hermitian(A, rtol):
    if not np.isfinite(rtol):
        return
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > rtol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian (relative asymmetry "
            f"{np.linalg.norm(A - A.conj().T) / scale:.3e} > {rtol:.1e})")


def hermitian_eig(A: np.ndarray, rtol: float = STRUCT_RTOL) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are sorted in descending order. Each eigenvector is scaled
    by a unit-modulus factor so that its first entry of largest magnitude
    is real and nonnegative.

    Parameters
    ----------
    A : ndarray
        Square Hermitian matrix.
    rtol : float
        Admissible ``||A - A^H||_F / ||A||_F`` before the input is rejected.

    Returns
    -------
    HermitianEigen
    """
    A = _square(A)
    _check_hermitian(A, rtol)
    values, basis = np.linalg.eigh(hermitian_part(A))
    values = values[::-1].copy()
    basis = basis[:, ::-1].astype(complex)
    if basis.size:
        pivot = np.argmax(np.abs(basis), axis=0)
        lead = basis[pivot, np.arange(basis.shape[1])]
        mag = np.abs(lead)
        phase = np.ones_like(lead)
        phase[mag > 0] = lead[mag > 0] / mag[mag > 0]
        basis = basis * phase.conj()[np.newaxis, :]
    return HermitianEigen(basis=basis, values=values)


def cholesky(A: np.ndarray, rtol: float = STRUCT_RTOL) -> CholeskyFactor:
    """Cholesky factor ``L`` (lower triangular, positive real diagonal) of ``A = L L^H``."""
    A = _square(A)
    _check_hermitian(A, rtol)
    try:
        L = np.linalg.cholesky(hermitian_part(A).astype(complex))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not Hermitian positive definite") from exc
    return CholeskyFactor(L=L)


def reduced_svd(A: np.ndarray, rank_tol: float = RANK_RTOL) -> ReducedSvd:
    """Reduced SVD ``A = U D V^H`` truncated to the numerical rank.

    The rank is the number of singular values larger than
    ``rank_tol * s_max``. A zero matrix yields empty factors.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("matrix has non-finite entries")
    n, m = A.shape
    if A.size == 0 or not np.any(A):
        return ReducedSvd(U=np.zeros((n, 0), complex), D=np.zeros((0, 0)),
                          V=np.zeros((m, 0), complex))
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    rho = int(np.count_nonzero(s > rank_tol * s[0]))
    return ReducedSvd(U=U[:, :rho], D=np.diag(s[:rho]), V=Vh[:rho, :].conj().T)


def solve_block_upper_triangular(M: np.ndarray, rhs: np.ndarray,
                                 blocks: Optional[Sequence[int]] = None) -> np.ndarray:
    """Back-substitution for a block upper triangular matrix with diagonal diagonal blocks.

    Parameters
    ----------
    M : ndarray
        Real square matrix. Block ``(a, b)`` with ``a > b`` must vanish and
        every diagonal block must itself be diagonal.
    rhs : ndarray
        Right-hand side.
    blocks : sequence of int, optional
        Block sizes. Defaults to ``1 x 1`` blocks, i.e. plain upper
        triangular back-substitution.

    Returns
    -------
    ndarray
        Solution ``x`` of ``M x = rhs``.

    Raises
    ------
    SingularMatrixError
        If a diagonal entry is not strictly positive.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    n = M.shape[0]
    if M.shape != (n, n) or rhs.shape != (n,):
        raise DimensionError("M must be square and match rhs")
    if blocks is None:
        blocks = [1] * n
    off = np.concatenate(([0], np.cumsum(blocks))).astype(int)
    if off[-1] != n:
        raise DimensionError("block sizes do not add up to the matrix size")
    # Lower part outside the (diagonal) diagonal blocks must vanish.
    scale = np.max(np.abs(M)) if n else 0.0
    if n and np.max(np.abs(np.tril(M, -1))) > STRUCT_RTOL * scale:
        raise DimensionError("matrix is not upper triangular")
    for b in range(len(blocks)):
        blk = M[off[b]:off[b + 1], off[b]:off[b + 1]]
        if np.max(np.abs(blk - np.diag(np.diag(blk))), initial=0.0) > STRUCT_RTOL * scale:
            raise DimensionError(f"diagonal block {b} is not diagonal")
    d = np.diag(M)
    if np.any(d <= 0):
        bad = np.flatnonzero(d <= 0)
        raise SingularMatrixError(f"nonpositive pivot at rows {bad.tolist()}")
    x = np.zeros(n)
    for b in range(len(blocks) - 1, -1, -1):
        s = slice(off[b], off[b + 1])
        acc = rhs[s] - M[s, off[b + 1]:] @ x[off[b + 1]:]
        x[s] = acc / d[s]
    return x


def solve_lu(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``M x = rhs`` by LU factorization with partial pivoting.

    One step of iterative refinement is applied on top of the
    forward-backward substitution.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    n = M.shape[0]
    if M.shape != (n, n) or rhs.shape != (n,):
        raise DimensionError("M must be square and match rhs")
    if n == 0:
        return np.zeros(0)
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(rhs))):
        raise NonFiniteError("linear system has non-finite entries")
    # Singularity is reported below as SingularMatrixError.
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    u = np.abs(np.diag(lu))
    if np.any(u <= n * np.finfo(float).eps * max(np.max(np.abs(M)), np.finfo(float).tiny)):
        raise SingularMatrixError("matrix is singular to working precision")
    x = sla.lu_solve((lu, piv), rhs, check_finite=False)
    x = x + sla.lu_solve((lu, piv), rhs - M @ x, check_finite=False)
    return x
