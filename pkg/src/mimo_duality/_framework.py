"""Machinery shared by the filter-based conversions.

Every conversion works on a *primal* domain with transmit filters ``tx[k]``
(columns are streams) and receive filters ``rx[k]`` (rows are streams).
The dual domain uses ``alpha * rx^*`` as transmit filters and
``tx^* / alpha`` as receive filters. The squared scalings solve
``M alpha^2 = s2 * ||tx||^2`` where ``M`` is assembled from the cross gains
``|rx_{b,m}^T E_{b,a} tx_{a,i}|^2`` and the interference pattern of the
primal domain.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DualityError, NotHermitianError
from .model import ScalingSolution, stream_offsets, stream_owner
from .numerics import hermitian_eig, hermitian_part, solve_block_upper_triangular, solve_lu
from .rates import InterferenceMode

# Relative asymmetry tolerated in rx @ E @ tx before decorrelation is refused.
DECORRELATE_RTOL = 1e-8
# Streams whose M row/column (or transmit power) fall below this relative
# level are removed before solving.
ZERO_STREAM_RTOL = 1e-24
# Negative round-off admitted in the solved scalings before clamping.
ALPHA_NEG_TOL = 1e-12

UPPER = "upper"
LOWER = "lower"
FULL = "full"


def pmap(fn: Callable, items, executor: Optional[Executor] = None) -> list:
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


def decorrelate_link(tx: np.ndarray, rx: np.ndarray, gain: np.ndarray,
                     rtol: float = DECORRELATE_RTOL):
    """Rotate one point-to-point link so that ``rx' E tx'`` is diagonal.

    ``gain`` is ``rx @ E @ tx``; it must be Hermitian, which holds for MMSE
    receivers. Returns ``(tx W, W^H rx, W)`` with ``W`` the eigenbasis of
    the Hermitian part of ``gain``.
    """
    scale = np.linalg.norm(gain)
    if scale > 0 and np.linalg.norm(gain - gain.conj().T) > rtol * scale:
        raise NotHermitianError(
            "receive filter times channel times precoder is not Hermitian; "
            "receivers must be MMSE (or otherwise Hermitian-matched) filters")
    W = hermitian_eig(hermitian_part(gain), rtol=np.inf).basis
    return tx @ W, W.conj().T @ rx, W


def offdiag_ratio(A: np.ndarray) -> float:
    """Largest off-diagonal magnitude relative to the largest diagonal magnitude."""
    A = np.asarray(A)
    if A.shape[0] < 2:
        return 0.0
    off = np.abs(A - np.diag(np.diag(A)))
    dmax = np.max(np.abs(np.diag(A)))
    if dmax == 0:
        return 0.0 if np.max(off) <= 1e-12 else float("inf")
    return float(np.max(off) / dmax)


@dataclass(frozen=True)
class MMatrix:
    """Scaling system ``M alpha^2 = rhs``.

    ``structure`` is ``"upper"`` (block upper triangular), ``"lower"`` or
    ``"full"``. ``active_mask`` covers all streams; after zero-stream
    removal ``M`` and ``rhs`` only hold the active rows and columns.
    """

    M: np.ndarray
    rhs: np.ndarray
    L: tuple
    structure: str
    active_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        rhs = np.array(self.rhs, dtype=float)
        M.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "L", tuple(int(x) for x in self.L))
        mask = self.active_mask
        if mask is None:
            mask = np.ones(sum(self.L), dtype=bool)
        mask = np.array(mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "active_mask", mask)

    @property
    def active_blocks(self) -> list:
        owner = stream_owner(self.L)[self.active_mask]
        return [int(np.count_nonzero(owner == k)) for k in range(len(self.L))]


def interference_mask(L: Sequence[int], mode: InterferenceMode, primal_is_mac: bool):
    """``mask[(a,i), (b,m)]`` is True when primal transmitter a interferes at receiver b."""
    owner = stream_owner(L)
    a = owner[:, None]
    b = owner[None, :]
    if mode is InterferenceMode.LINEAR:
        return a != b
    return a < b if primal_is_mac else a > b


def assemble_m(received: np.ndarray, signatures: np.ndarray, rx_pow: np.ndarray,
               tx_pow: np.ndarray, L: Sequence[int], noise_var: float,
               mode: InterferenceMode, primal_is_mac: bool) -> MMatrix:
    """Build the scaling system from stacked filters.

    Parameters
    ----------
    received : ndarray, shape (n, N)
        Row ``(b, m)`` is receive filter ``(b, m)`` combined with everything
        on the receiver side of the channel.
    signatures : ndarray, shape (N, n)
        Column ``(a, i)`` is transmit stream ``(a, i)`` after everything on
        the transmitter side, so that ``received @ signatures`` holds
        ``rx_{b,m}^T E_{b,a} tx_{a,i}`` at ``[(b,m), (a,i)]``.
    rx_pow, tx_pow : ndarray
        Squared norms of the receive and transmit filters per stream.
    """
    coupling = np.abs(received @ signatures).T ** 2
    coupling = np.where(interference_mask(L, mode, primal_is_mac), coupling, 0.0)
    M = -coupling
    np.fill_diagonal(M, noise_var * rx_pow + coupling.sum(axis=0))
    if mode is InterferenceMode.LINEAR:
        structure = FULL
    else:
        structure = UPPER if primal_is_mac else LOWER
    return MMatrix(M=M, rhs=noise_var * tx_pow, L=tuple(L), structure=structure)


def remove_zero_streams(m: MMatrix, tx_pow: np.ndarray,
                        rtol: float = ZERO_STREAM_RTOL) -> MMatrix:
    """Drop streams with vanishing M row and column or vanishing transmit power."""
    M = np.asarray(m.M)
    n = M.shape[0]
    if n == 0:
        return m
    absM = np.abs(M)
    scale = absM.max()
    line = np.maximum(absM.max(axis=0), absM.max(axis=1))
    zero_m = line <= rtol * scale if scale > 0 else np.ones(n, dtype=bool)
    tmax = np.max(tx_pow)
    zero_t = tx_pow <= rtol * tmax if tmax > 0 else np.ones(n, dtype=bool)
    keep = ~(zero_m | zero_t)
    idx = np.flatnonzero(keep)
    return MMatrix(M=M[np.ix_(idx, idx)], rhs=np.asarray(m.rhs)[idx], L=m.L,
                   structure=m.structure, active_mask=keep)


def solve_m(m: MMatrix, linear_solver: Optional[Callable] = None) -> ScalingSolution:
    """Solve a reduced scaling system and expand back to all streams."""
    blocks = m.active_blocks
    M = np.asarray(m.M)
    rhs = np.asarray(m.rhs)
    if M.shape[0] == 0:
        x = np.zeros(0)
    elif m.structure == UPPER:
        x = solve_block_upper_triangular(M, rhs, blocks)
    elif m.structure == LOWER:
        x = solve_block_upper_triangular(M[::-1, ::-1], rhs[::-1], blocks[::-1])[::-1]
    else:
        x = (linear_solver or solve_lu)(M, rhs)
    scale = max(np.max(np.abs(x)) if x.size else 0.0, np.finfo(float).tiny)
    if np.any(x < -ALPHA_NEG_TOL * scale):
        raise DualityError(f"negative scaling factor {x.min():.3e}; M is not an M-matrix")
    x = np.maximum(x, 0.0)
    alpha_sq = np.zeros(m.active_mask.shape[0])
    alpha_sq[m.active_mask] = x
    return ScalingSolution(alpha_sq=alpha_sq, active_mask=m.active_mask)


def flip_stream(rx_row: np.ndarray, tx_col: np.ndarray, alpha_sq: float):
    """Dual filters of one stream: ``(alpha rx^*, tx^* / alpha)``."""
    if alpha_sq <= 0:
        raise DualityError("active stream has zero scaling factor")
    alpha = np.sqrt(alpha_sq)
    return alpha * np.conj(rx_row), np.conj(tx_col) / alpha


def flip_all(tx: Sequence[np.ndarray], rx: Sequence[np.ndarray], scaling: ScalingSolution,
             executor: Optional[Executor] = None):
    """Apply :func:`flip_stream` to every stream; inactive streams get zero filters.

    Returns the dual transmit filters (columns) and dual receive filters (rows).
    """
    L = [t.shape[1] for t in tx]
    off = stream_offsets(L)
    jobs = [(k, i) for k in range(len(L)) for i in range(L[k])]

    def one(job):
        k, i = job
        j = off[k] + i
        if not scaling.active_mask[j]:
            return np.zeros(rx[k].shape[1], complex), np.zeros(tx[k].shape[0], complex)
        return flip_stream(rx[k][i], tx[k][:, i], float(scaling.alpha_sq[j]))

    out = pmap(one, jobs, executor)
    new_tx, new_rx = [], []
    for k in range(len(L)):
        cols = [out[off[k] + i][0] for i in range(L[k])]
        rows = [out[off[k] + i][1] for i in range(L[k])]
        new_tx.append(np.stack(cols, axis=1))
        new_rx.append(np.stack(rows, axis=0))
    return new_tx, new_rx


def stream_powers(filters: Sequence[np.ndarray], axis: int) -> np.ndarray:
    """Squared norm of every stream; ``axis=0`` for column filters, 1 for row filters."""
    return np.concatenate([np.sum(np.abs(f) ** 2, axis=axis) for f in filters])
