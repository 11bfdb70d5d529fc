"""Filter-based MAC/BC conversion with successive interference cancellation.

MAC-to-BC steps, per user k (independent of each other):

1. MMSE receiver ``G_k`` against the users ``l <= k``.
2. Decorrelation ``W_k`` = eigenbasis of ``G_k H_k T_k``; ``T'_k = T_k W_k``,
   ``G'_k = W_k^H G_k``.

Then, once for all streams, the block upper triangular scaling system is
solved by back-substitution and every stream is flipped independently:
``p = alpha g'^*`` and ``b = t'^* / alpha``.

The BC-to-MAC direction uses the same steps with the roles of transmitter
and receiver exchanged: BC MMSE receivers see users ``l > k``, the scaling
system is block *lower* triangular, and ``t = beta b'^*``, ``g = p'^* / beta``.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _framework as fw
from ._framework import MMatrix
from .model import (
    BcFilterSet,
    ChannelSet,
    Domain,
    MacFilterSet,
    RateReport,
    ScalingSolution,
)
from .rates import InterferenceMode, bc_mmse_receiver, mac_mmse_receiver, report

__all__ = [
    "DecorrelatedMac",
    "DecorrelatedBc",
    "MMatrix",
    "ConversionResult",
    "mmse_receivers_sic",
    "bc_mmse_receivers",
    "decorrelate",
    "decorrelate_bc",
    "build_m_matrix_sic",
    "build_m_matrix_bc",
    "remove_zero_streams",
    "solve_scaling",
    "flip_filters",
    "flip_filters_bc",
    "mac_to_bc",
    "bc_to_mac",
]

_SIC = InterferenceMode.SIC


@dataclass(frozen=True)
class DecorrelatedMac:
    """Rotated MAC filters: ``T_prime[k] = T[k] W[k]``, ``G_prime[k] = W[k]^H G[k]``."""

    T_prime: tuple
    G_prime: tuple
    W: tuple


@dataclass(frozen=True)
class DecorrelatedBc:
    """Rotated BC filters: ``P_prime[k] = P[k] W[k]``, ``B_prime[k] = W[k]^H B[k]``."""

    P_prime: tuple
    B_prime: tuple
    W: tuple


@dataclass(frozen=True)
class ConversionResult:
    """Outcome of one filter-based conversion.

    Attributes
    ----------
    direction : str
        ``"mac-to-bc"`` or ``"bc-to-mac"``.
    mode : InterferenceMode
    source : MacFilterSet or BcFilterSet
        Decorrelated filters of the input domain, receivers included.
    target : BcFilterSet or MacFilterSet
        Converted filters.
    decorrelated : DecorrelatedMac or DecorrelatedBc
    m_matrix : MMatrix
        Scaling system before zero-stream removal.
    scaling : ScalingSolution
    source_report, target_report : RateReport
        Stream-wise reports of both domains.
    """

    direction: str
    mode: InterferenceMode
    source: Union[MacFilterSet, BcFilterSet]
    target: Union[MacFilterSet, BcFilterSet]
    decorrelated: Union[DecorrelatedMac, DecorrelatedBc]
    m_matrix: MMatrix
    scaling: ScalingSolution
    source_report: RateReport
    target_report: RateReport

    @property
    def filters(self):
        return self.target

    @property
    def mac_report(self) -> RateReport:
        return self.source_report if self.direction == "mac-to-bc" else self.target_report

    @property
    def bc_report(self) -> RateReport:
        return self.target_report if self.direction == "mac-to-bc" else self.source_report

    @property
    def reports(self) -> tuple:
        """``(mac_report, bc_report)``."""
        return self.mac_report, self.bc_report


def mmse_receivers_sic(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float,
                       executor: Optional[Executor] = None) -> list:
    """MMSE receivers ``G_k = T_k^H H_k^H (sum_{l<=k} H_l T_l T_l^H H_l^H + s2 I)^{-1}``."""
    return fw.pmap(lambda k: mac_mmse_receiver(channels, T, k, noise_var, _SIC),
                   range(channels.K), executor)


def bc_mmse_receivers(channels: ChannelSet, P: Sequence[np.ndarray], noise_var: float,
                      mode: InterferenceMode = _SIC,
                      executor: Optional[Executor] = None) -> list:
    return fw.pmap(lambda k: bc_mmse_receiver(channels, P, k, noise_var, mode),
                   range(channels.K), executor)


def decorrelate(channels: ChannelSet, T: Sequence[np.ndarray], G: Sequence[np.ndarray],
                executor: Optional[Executor] = None) -> DecorrelatedMac:
    """Diagonalize every ``G_k H_k T_k`` with the unitary ``W_k``.

    Raises
    ------
    NotHermitianError
        If some ``G_k H_k T_k`` is not Hermitian, i.e. ``G`` is not the
        MMSE receiver of ``T``.
    """
    out = fw.pmap(lambda k: fw.decorrelate_link(T[k], G[k], G[k] @ channels.H[k] @ T[k]),
                  range(channels.K), executor)
    return DecorrelatedMac(*(tuple(x) for x in zip(*out)))


def decorrelate_bc(channels: ChannelSet, P: Sequence[np.ndarray], B: Sequence[np.ndarray],
                   executor: Optional[Executor] = None) -> DecorrelatedBc:
    """Diagonalize every ``B_k H_k^H P_k``."""
    out = fw.pmap(lambda k: fw.decorrelate_link(P[k], B[k], B[k] @ channels.bc(k) @ P[k]),
                  range(channels.K), executor)
    return DecorrelatedBc(*(tuple(x) for x in zip(*out)))


def _m_from_mac(channels, Tp, Gp, noise_var, mode) -> MMatrix:
    received = np.vstack(Gp)
    signatures = np.hstack([h @ t for h, t in zip(channels.H, Tp)])
    return fw.assemble_m(received, signatures, fw.stream_powers(Gp, axis=1),
                         fw.stream_powers(Tp, axis=0), [t.shape[1] for t in Tp],
                         noise_var, mode, primal_is_mac=True)


def _m_from_bc(channels, Pp, Bp, noise_var, mode) -> MMatrix:
    received = np.vstack([b @ channels.bc(k) for k, b in enumerate(Bp)])
    signatures = np.hstack(Pp)
    return fw.assemble_m(received, signatures, fw.stream_powers(Bp, axis=1),
                         fw.stream_powers(Pp, axis=0), [p.shape[1] for p in Pp],
                         noise_var, mode, primal_is_mac=False)


def build_m_matrix_sic(channels: ChannelSet, dec: DecorrelatedMac,
                       noise_var: float) -> MMatrix:
    """Block upper triangular scaling system of the MAC-to-BC conversion.

    Off-diagonal entry ``[(a,i), (b,m)] = -|g'_{b,m}^T H_a t'_{a,i}|^2`` for
    ``a < b``; diagonal entry ``s2 ||g'_{a,i}||^2`` plus the interference
    power received by ``g'_{a,i}`` from the users ``l < a``.
    """
    return _m_from_mac(channels, dec.T_prime, dec.G_prime, noise_var, _SIC)


def build_m_matrix_bc(channels: ChannelSet, dec: DecorrelatedBc, noise_var: float,
                      mode: InterferenceMode = _SIC) -> MMatrix:
    """Scaling system of the BC-to-MAC conversion (block lower triangular with SIC)."""
    return _m_from_bc(channels, dec.P_prime, dec.B_prime, noise_var, mode)


def _tx_powers(dec) -> np.ndarray:
    tx = dec.T_prime if isinstance(dec, DecorrelatedMac) else dec.P_prime
    return fw.stream_powers(tx, axis=0)


def remove_zero_streams(m: MMatrix, dec: Union[DecorrelatedMac, DecorrelatedBc]):
    """Remove streams that carry no signal.

    Returns
    -------
    reduced : MMatrix
        System restricted to the active streams.
    active_mask : ndarray of bool
        One entry per stream, False where a stream was removed.
    """
    reduced = fw.remove_zero_streams(m, _tx_powers(dec))
    return reduced, reduced.active_mask


def solve_scaling(m: MMatrix) -> ScalingSolution:
    """Solve a reduced triangular scaling system by block back-substitution."""
    return fw.solve_m(m)


def flip_filters(dec: DecorrelatedMac, scaling: ScalingSolution,
                 executor: Optional[Executor] = None) -> BcFilterSet:
    """``p_{k,i} = alpha g'^*_{k,i}`` and ``b_{k,i} = t'^*_{k,i} / alpha``; removed streams get zeros."""
    P, B = fw.flip_all(dec.T_prime, dec.G_prime, scaling, executor)
    return BcFilterSet(P, B)


def flip_filters_bc(dec: DecorrelatedBc, scaling: ScalingSolution,
                    executor: Optional[Executor] = None) -> MacFilterSet:
    """``t_{k,i} = beta b'^*_{k,i}`` and ``g_{k,i} = p'^*_{k,i} / beta``."""
    T, G = fw.flip_all(dec.P_prime, dec.B_prime, scaling, executor)
    return MacFilterSet(T, G)


def run_mac_to_bc(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float,
                  mode: InterferenceMode, receivers: Callable, decorrelator: Callable,
                  G: Optional[Sequence[np.ndarray]] = None,
                  executor: Optional[Executor] = None) -> ConversionResult:
    T = [np.asarray(t, dtype=complex) for t in T]
    if G is None:
        G = receivers(channels, T, noise_var, executor=executor)
    dec = decorrelator(channels, T, G, executor=executor)
    m = _m_from_mac(channels, dec.T_prime, dec.G_prime, noise_var, mode)
    reduced, _ = remove_zero_streams(m, dec)
    scaling = fw.solve_m(reduced)
    bc = flip_filters(dec, scaling, executor)
    mac = MacFilterSet(dec.T_prime, dec.G_prime)
    return ConversionResult(
        direction="mac-to-bc", mode=mode, source=mac, target=bc, decorrelated=dec,
        m_matrix=m, scaling=scaling,
        source_report=report(channels, mac, noise_var, mode),
        target_report=report(channels, bc, noise_var, mode))


def run_bc_to_mac(channels: ChannelSet, P: Sequence[np.ndarray], noise_var: float,
                  mode: InterferenceMode, B: Optional[Sequence[np.ndarray]] = None,
                  executor: Optional[Executor] = None) -> ConversionResult:
    P = [np.asarray(p, dtype=complex) for p in P]
    if B is None:
        B = bc_mmse_receivers(channels, P, noise_var, mode, executor=executor)
    dec = decorrelate_bc(channels, P, B, executor=executor)
    m = _m_from_bc(channels, dec.P_prime, dec.B_prime, noise_var, mode)
    reduced, _ = remove_zero_streams(m, dec)
    scaling = fw.solve_m(reduced)
    mac = flip_filters_bc(dec, scaling, executor)
    bc = BcFilterSet(dec.P_prime, dec.B_prime)
    return ConversionResult(
        direction="bc-to-mac", mode=mode, source=bc, target=mac, decorrelated=dec,
        m_matrix=m, scaling=scaling,
        source_report=report(channels, bc, noise_var, mode),
        target_report=report(channels, mac, noise_var, mode))


def mac_to_bc(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float,
              G: Optional[Sequence[np.ndarray]] = None,
              executor: Optional[Executor] = None) -> ConversionResult:
    """Convert MAC precoders to BC filters with identical per-stream SINRs.

    Parameters
    ----------
    channels : ChannelSet
    T : sequence of ndarray
        MAC precoders ``T[k]`` of shape ``r[k] x L[k]``.
    noise_var : float
    G : sequence of ndarray, optional
        MAC receivers. Defaults to the MMSE receivers; custom receivers
        must make every ``G_k H_k T_k`` Hermitian.
    executor : concurrent.futures.Executor, optional
        Runs the per-user and per-stream phases concurrently.

    Returns
    -------
    ConversionResult
        ``result.filters`` is the BC filter set, ``result.reports`` the
        ``(mac, bc)`` rate reports.
    """
    return run_mac_to_bc(channels, T, noise_var, _SIC, mmse_receivers_sic, decorrelate,
                         G=G, executor=executor)


def bc_to_mac(channels: ChannelSet, P: Sequence[np.ndarray], noise_var: float,
              B: Optional[Sequence[np.ndarray]] = None,
              executor: Optional[Executor] = None) -> ConversionResult:
    """Convert BC precoders (and optionally receivers) to MAC filters.

    Without ``B`` the BC MMSE receivers are used, which achieve the
    dirty-paper rate of ``S_k = P_k P_k^H``. Passing the receivers produced
    by :func:`mac_to_bc` reproduces exactly the rates of that conversion.
    """
    return run_bc_to_mac(channels, P, noise_var, _SIC, B=B, executor=executor)
