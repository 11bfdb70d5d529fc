"""Domain types shared by all modules.

Conventions
-----------
* Users are indexed from 0. With interference cancellation, user 0 is
  decoded last in the MAC and precoded first in the BC.
* ``H[k]`` is the ``N x r[k]`` MAC channel of user k. The BC channel of
  user k is ``H[k].conj().T``.
* Streams are flattened user-major, stream-minor:
  ``(0, 0), (0, 1), ..., (K-1, L[K-1]-1)``.
* Every value object is immutable; arrays are stored as read-only copies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    DimensionError,
    NoiseVarianceError,
    NonFiniteError,
    NotHermitianError,
    NotPositiveDefiniteError,
    PermutationError,
)

__all__ = [
    "Domain",
    "SystemDimensions",
    "ChannelSet",
    "MacFilterSet",
    "BcFilterSet",
    "CovarianceSet",
    "ScalingSolution",
    "RateReport",
    "validate",
    "apply_user_order",
    "permute_users",
    "stream_offsets",
    "stream_owner",
    "STRUCT_RTOL",
    "PSD_RTOL",
]

# Relative tolerance for structural checks (Hermitian symmetry etc.).
STRUCT_RTOL = 1e-10
# Smallest admissible eigenvalue of a PSD matrix, relative to the largest.
PSD_RTOL = 1e-9


def _frozen_matrices(mats, dtype=complex) -> tuple:
    out = []
    for m in mats:
        a = np.array(m, dtype=dtype, copy=True)
        if a.ndim != 2:
            raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
        a.setflags(write=False)
        out.append(a)
    return tuple(out)


def _frozen_vector(v, dtype) -> np.ndarray:
    a = np.array(v, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


def stream_offsets(L: Sequence[int]) -> np.ndarray:
    """Start index of every user's block in the flat stream vector.

    The returned array has ``K + 1`` entries; user k owns the slice
    ``offsets[k]:offsets[k + 1]``.
    """
    return np.concatenate(([0], np.cumsum(np.asarray(L, dtype=int))))


def stream_owner(L: Sequence[int]) -> np.ndarray:
    """User index of every flattened stream."""
    return np.repeat(np.arange(len(L)), np.asarray(L, dtype=int))


class Domain(enum.Enum):
    MAC = "mac"
    BC = "bc"


@dataclass(frozen=True)
class SystemDimensions:
    """Sizes of a multi-user MIMO system.

    Parameters
    ----------
    K : int
        Number of users.
    N : int
        Number of base-station antennas.
    r : sequence of int
        Antennas of every user.
    L : sequence of int
        Streams of every user, ``1 <= L[k] <= min(r[k], N)``.
    noise_var : float
        Noise variance per receive antenna (linear units), strictly positive.
    """

    K: int
    N: int
    r: tuple
    L: tuple
    noise_var: float

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(int(x) for x in self.r))
        object.__setattr__(self, "L", tuple(int(x) for x in self.L))
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def total_streams(self) -> int:
        return sum(self.L)

    def check(self) -> None:
        """Raise if the dimension invariants are violated."""
        if self.K < 1 or self.N < 1:
            raise DimensionError("K and N must be positive")
        if len(self.r) != self.K or len(self.L) != self.K:
            raise DimensionError("r and L must have one entry per user")
        for k, (rk, lk) in enumerate(zip(self.r, self.L)):
            if rk < 1:
                raise DimensionError(f"user {k}: r must be positive, got {rk}")
            if not 1 <= lk <= min(rk, self.N):
                raise DimensionError(
                    f"user {k}: need 1 <= L <= min(r, N), got L={lk}, r={rk}, N={self.N}")
        if not np.isfinite(self.noise_var):
            raise NonFiniteError("noise variance is not finite")
        if self.noise_var <= 0:
            raise NoiseVarianceError(
                f"noise variance must be > 0 (got {self.noise_var}); the scaling "
                "system is only guaranteed to be an M-matrix for positive noise")


@dataclass(frozen=True)
class ChannelSet:
    """MAC channel matrices ``H[k]`` of shape ``N x r[k]``."""

    H: tuple

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen_matrices(self.H))

    @property
    def K(self) -> int:
        return len(self.H)

    @property
    def N(self) -> int:
        return self.H[0].shape[0]

    def bc(self, k: int) -> np.ndarray:
        """BC channel of user k, ``H[k]^H``."""
        return self.H[k].conj().T


@dataclass(frozen=True)
class MacFilterSet:
    """MAC precoders ``T[k]`` (``r[k] x L[k]``) and receivers ``G[k]`` (``L[k] x N``).

    The receivers are optional until they have been computed.
    """

    T: tuple
    G: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "T", _frozen_matrices(self.T))
        if self.G is not None:
            object.__setattr__(self, "G", _frozen_matrices(self.G))
            if len(self.G) != len(self.T):
                raise DimensionError("T and G must have one entry per user")

    @property
    def sum_power(self) -> float:
        return float(sum(np.vdot(t, t).real for t in self.T))

    def covariances(self) -> "CovarianceSet":
        return CovarianceSet(Domain.MAC, [t @ t.conj().T for t in self.T])


@dataclass(frozen=True)
class BcFilterSet:
    """BC precoders ``P[k]`` (``N x L[k]``) and receivers ``B[k]`` (``L[k] x r[k]``).

    Row i of ``B[k]`` is the receive filter ``b_{k,i}^T`` of stream i.
    """

    P: tuple
    B: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen_matrices(self.P))
        if self.B is not None:
            object.__setattr__(self, "B", _frozen_matrices(self.B))
            if len(self.B) != len(self.P):
                raise DimensionError("P and B must have one entry per user")

    @property
    def sum_power(self) -> float:
        return float(sum(np.vdot(p, p).real for p in self.P))

    def covariances(self) -> "CovarianceSet":
        return CovarianceSet(Domain.BC, [p @ p.conj().T for p in self.P])


@dataclass(frozen=True)
class CovarianceSet:
    """Transmit covariances of one domain (``Q[k]`` in the MAC, ``S[k]`` in the BC)."""

    domain: Domain
    matrices: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrices", _frozen_matrices(self.matrices))

    def __len__(self):
        return len(self.matrices)

    def __getitem__(self, k):
        return self.matrices[k]

    def __iter__(self):
        return iter(self.matrices)

    @property
    def sum_power(self) -> float:
        return float(sum(np.trace(m).real for m in self.matrices))

    def check(self, rtol: float = STRUCT_RTOL, psd_rtol: float = PSD_RTOL) -> None:
        """Raise unless every matrix is Hermitian PSD within tolerance."""
        for k, m in enumerate(self.matrices):
            if m.shape[0] != m.shape[1]:
                raise DimensionError(f"covariance {k} is not square")
            if not np.all(np.isfinite(m)):
                raise NonFiniteError(f"covariance {k} has non-finite entries")
            scale = max(np.linalg.norm(m), np.finfo(float).tiny)
            if np.linalg.norm(m - m.conj().T) > rtol * scale:
                raise NotHermitianError(f"covariance {k} is not Hermitian")
            ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
            if ev.size and ev[0] < -psd_rtol * max(ev[-1], 0.0):
                raise NotPositiveDefiniteError(
                    f"covariance {k} has negative eigenvalue {ev[0]:.3e}")


@dataclass(frozen=True)
class ScalingSolution:
    """Per-stream squared scaling factors and the mask of active streams."""

    alpha_sq: np.ndarray
    active_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_sq", _frozen_vector(self.alpha_sq, float))
        object.__setattr__(self, "active_mask", _frozen_vector(self.active_mask, bool))
        if self.alpha_sq.shape != self.active_mask.shape:
            raise DimensionError("alpha_sq and active_mask differ in length")


@dataclass(frozen=True)
class RateReport:
    """Per-stream SINRs, per-user rates (bits/channel use) and sum power.

    ``per_stream_sinr`` is empty for reports computed from covariances,
    where no stream decomposition exists.
    """

    per_stream_sinr: tuple
    per_user_rate: tuple
    sum_rate: float
    sum_power: float
    domain: Domain = field(default=Domain.MAC)

    def __post_init__(self):
        object.__setattr__(self, "per_stream_sinr",
                           tuple(tuple(float(x) for x in s) for s in self.per_stream_sinr))
        object.__setattr__(self, "per_user_rate", tuple(float(x) for x in self.per_user_rate))
        object.__setattr__(self, "sum_rate", float(self.sum_rate))
        object.__setattr__(self, "sum_power", float(self.sum_power))

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.value,
            "per_stream_sinr": [list(s) for s in self.per_stream_sinr],
            "per_user_rate": list(self.per_user_rate),
            "sum_rate": self.sum_rate,
            "sum_power": self.sum_power,
        }


def _check_finite(name, mats):
    for k, m in enumerate(mats):
        if not np.all(np.isfinite(m)):
            raise NonFiniteError(f"{name}[{k}] has non-finite entries")


def validate(dims: SystemDimensions, channels: ChannelSet,
             mac_filters: Optional[MacFilterSet] = None,
             bc_filters: Optional[BcFilterSet] = None) -> None:
    """Check every type invariant; return ``None`` or raise a :class:`DualityError`.

    Filter sets are optional and checked only when given.
    """
    dims.check()
    if channels.K != dims.K:
        raise DimensionError(f"expected {dims.K} channels, got {channels.K}")
    for k, h in enumerate(channels.H):
        if h.shape != (dims.N, dims.r[k]):
            raise DimensionError(
                f"H[{k}] has shape {h.shape}, expected {(dims.N, dims.r[k])}")
    _check_finite("H", channels.H)

    if mac_filters is not None:
        if len(mac_filters.T) != dims.K:
            raise DimensionError("MAC filter set must have one precoder per user")
        for k, t in enumerate(mac_filters.T):
            if t.shape != (dims.r[k], dims.L[k]):
                raise DimensionError(
                    f"T[{k}] has shape {t.shape}, expected {(dims.r[k], dims.L[k])}")
        _check_finite("T", mac_filters.T)
        if mac_filters.G is not None:
            for k, g in enumerate(mac_filters.G):
                if g.shape != (dims.L[k], dims.N):
                    raise DimensionError(
                        f"G[{k}] has shape {g.shape}, expected {(dims.L[k], dims.N)}")
            _check_finite("G", mac_filters.G)

    if bc_filters is not None:
        if len(bc_filters.P) != dims.K:
            raise DimensionError("BC filter set must have one precoder per user")
        for k, p in enumerate(bc_filters.P):
            if p.shape != (dims.N, dims.L[k]):
                raise DimensionError(
                    f"P[{k}] has shape {p.shape}, expected {(dims.N, dims.L[k])}")
        _check_finite("P", bc_filters.P)
        if bc_filters.B is not None:
            for k, b in enumerate(bc_filters.B):
                if b.shape != (dims.L[k], dims.r[k]):
                    raise DimensionError(
                        f"B[{k}] has shape {b.shape}, expected {(dims.L[k], dims.r[k])}")
            _check_finite("B", bc_filters.B)


def _check_perm(perm, K: int) -> list:
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(K)):
        raise PermutationError(f"{perm} is not a permutation of 0..{K - 1}")
    return perm


def permute_users(items: Sequence, perm: Sequence[int]) -> list:
    """Reorder per-user items so that new user j is old user ``perm[j]``."""
    perm = _check_perm(perm, len(items))
    return [items[p] for p in perm]


def apply_user_order(channels: ChannelSet, perm: Sequence[int]) -> ChannelSet:
    """Relabel users so that new user j is old user ``perm[j]``.

    Use this to realize an arbitrary decoding order: the user placed at
    position 0 is decoded last in the MAC and precoded first in the BC.
    """
    return ChannelSet(permute_users(channels.H, perm))
