"""Rates, SINRs and error covariances in the MAC and the BC.

All logarithms are base 2; rates are in bits per channel use. Receive
filters are stored row-wise: row i of ``G[k]`` is ``g_{k,i}^T`` and acts on
the received vector by plain transposition, so quadratic forms read
``g^T X g^*``.

User k's interferers depend on the mode:

=========  =================  =================
mode       MAC (receiver k)   BC (receiver k)
=========  =================  =================
SIC        users l < k        users l > k
LINEAR     users l != k       users l != k
=========  =================  =================
"""

from __future__ import annotations

import enum
from typing import Sequence, Union

import numpy as np
import scipy.linalg as sla

from .exceptions import DualityError, NotPositiveDefiniteError, UndefinedSinrError
from .model import (
    BcFilterSet,
    ChannelSet,
    CovarianceSet,
    Domain,
    MacFilterSet,
    RateReport,
)

__all__ = [
    "InterferenceMode",
    "interferers",
    "mac_interference_matrix",
    "mac_distortion_matrix",
    "bc_interference_matrix",
    "mac_rate_sic",
    "mac_rate_sic_quotient",
    "bc_rate_dpc",
    "bc_rate_dpc_quotient",
    "mac_rate_linear_joint",
    "mac_rate_linear_joint_direct",
    "bc_rate_linear_joint",
    "mac_mmse_receiver",
    "bc_mmse_receiver",
    "mac_error_covariance",
    "mac_error_covariance_inverse_form",
    "rate_from_error_cov",
    "sinr_mac",
    "sinr_mac_simplified",
    "sinr_mac_closed_form",
    "sinr_bc",
    "stream_sinrs_mac",
    "stream_sinrs_bc",
    "report",
    "logdet2",
]

_LN2 = np.log(2.0)
_LOG_FLOOR = 1e-300


class InterferenceMode(enum.Enum):
    SIC = "sic"
    LINEAR = "linear"


def interferers(k: int, K: int, mode: InterferenceMode, domain: Domain) -> list:
    """Users whose signal reaches receiver k as interference."""
    if mode is InterferenceMode.LINEAR:
        return [l for l in range(K) if l != k]
    if domain is Domain.MAC:
        return list(range(k))
    return list(range(k + 1, K))


def logdet2(A: np.ndarray) -> float:
    """``log2 det(A)`` of a Hermitian positive definite matrix via Cholesky."""
    try:
        L = np.linalg.cholesky(0.5 * (A + A.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("log-determinant of a non-PD matrix") from exc
    return float(2.0 * np.sum(np.log(np.diag(L).real)) / _LN2)


def _received_cov(H, Q):
    return H @ Q @ H.conj().T


def mac_interference_matrix(channels: ChannelSet, Q: Sequence[np.ndarray], k: int,
                            noise_var: float,
                            mode: InterferenceMode = InterferenceMode.SIC) -> np.ndarray:
    """Noise-plus-interference matrix seen by the base station.

    SIC: ``X_k = s2 I + sum_{l<k} H_l Q_l H_l^H``. LINEAR: the common
    ``X = s2 I + sum_{l} H_l Q_l H_l^H`` over *all* users, independent of k.
    """
    N = channels.N
    X = noise_var * np.eye(N, dtype=complex)
    users = range(k) if mode is InterferenceMode.SIC else range(channels.K)
    for l in users:
        X = X + _received_cov(channels.H[l], Q[l])
    return X


def mac_distortion_matrix(channels: ChannelSet, Q: Sequence[np.ndarray], k: int,
                          noise_var: float,
                          mode: InterferenceMode = InterferenceMode.SIC) -> np.ndarray:
    """Noise plus inter-user interference of MAC user k (user k itself excluded)."""
    X = noise_var * np.eye(channels.N, dtype=complex)
    for l in interferers(k, channels.K, mode, Domain.MAC):
        X = X + _received_cov(channels.H[l], Q[l])
    return X


def bc_interference_matrix(channels: ChannelSet, S: Sequence[np.ndarray], k: int,
                           noise_var: float,
                           mode: InterferenceMode = InterferenceMode.SIC) -> np.ndarray:
    """``Y_k = s2 I + sum_l H_k^H S_l H_k`` over the BC interferers of user k."""
    Hk = channels.H[k]
    Y = noise_var * np.eye(Hk.shape[1], dtype=complex)
    for l in interferers(k, channels.K, mode, Domain.BC):
        Y = Y + Hk.conj().T @ S[l] @ Hk
    return Y


def _whitened_gain(X, H, Q):
    """Hermitian ``L^{-1} H Q H^H L^{-H}`` for ``X = L L^H``."""
    L = np.linalg.cholesky(X)
    A = sla.solve_triangular(L, H, lower=True)
    G = A @ Q @ A.conj().T
    return 0.5 * (G + G.conj().T)


def _logdet_identity_plus(G) -> float:
    n = G.shape[0]
    return logdet2(np.eye(n) + G)


def mac_rate_sic(channels: ChannelSet, Q: Sequence[np.ndarray], k: int,
                 noise_var: float) -> float:
    """MAC rate of user k with successive cancellation, ``log2|I + X_k^{-1} H_k Q_k H_k^H|``."""
    X = mac_interference_matrix(channels, Q, k, noise_var, InterferenceMode.SIC)
    return max(_logdet_identity_plus(_whitened_gain(X, channels.H[k], Q[k])), 0.0)


def mac_rate_sic_quotient(channels: ChannelSet, Q: Sequence[np.ndarray], k: int,
                          noise_var: float) -> float:
    """Same rate as :func:`mac_rate_sic` written as a quotient of determinants."""
    X = mac_interference_matrix(channels, Q, k, noise_var, InterferenceMode.SIC)
    return logdet2(X + _received_cov(channels.H[k], Q[k])) - logdet2(X)


def bc_rate_dpc(channels: ChannelSet, S: Sequence[np.ndarray], k: int,
                noise_var: float) -> float:
    """BC rate of user k with dirty paper coding, ``log2|I + F^{-H} H_k^H S_k H_k F^{-1}|``.

    ``Y_k = F^H F`` with ``F`` the Hermitian transpose of the Cholesky
    factor of ``Y_k``.
    """
    Y = bc_interference_matrix(channels, S, k, noise_var, InterferenceMode.SIC)
    return max(_logdet_identity_plus(_whitened_gain(Y, channels.bc(k), S[k])), 0.0)


def bc_rate_dpc_quotient(channels: ChannelSet, S: Sequence[np.ndarray], k: int,
                         noise_var: float) -> float:
    Y = bc_interference_matrix(channels, S, k, noise_var, InterferenceMode.SIC)
    Hb = channels.bc(k)
    return logdet2(Y + Hb @ S[k] @ Hb.conj().T) - logdet2(Y)


def mac_rate_linear_joint(channels: ChannelSet, Q: Sequence[np.ndarray], k: int,
                          noise_var: float) -> float:
    """Joint-decoding MAC rate without cancellation, ``-log2|I - X^{-1} H_k Q_k H_k^H|``.

    ``X`` is the common matrix including every user. The determinant is
    evaluated through the eigenvalues of the Hermitian-similar matrix
    ``I - L^{-1} H_k Q_k H_k^H L^{-H}``.
    """
    X = mac_interference_matrix(channels, Q, k, noise_var, InterferenceMode.LINEAR)
    G = _whitened_gain(X, channels.H[k], Q[k])
    ev = np.linalg.eigvalsh(np.eye(G.shape[0]) - G)
    if ev[0] < _LOG_FLOOR:
        raise NotPositiveDefiniteError(
            f"I - X^-1 H Q H^H is numerically singular (eigenvalue {ev[0]:.3e})")
    return max(float(-np.sum(np.log(ev)) / _LN2), 0.0)


def mac_rate_linear_joint_direct(channels: ChannelSet, Q: Sequence[np.ndarray], k: int,
                                 noise_var: float) -> float:
    """``log2|I + (s2 I + sum_{l!=k} H_l Q_l H_l^H)^{-1} H_k Q_k H_k^H|``."""
    X = mac_distortion_matrix(channels, Q, k, noise_var, InterferenceMode.LINEAR)
    return _logdet_identity_plus(_whitened_gain(X, channels.H[k], Q[k]))


def bc_rate_linear_joint(channels: ChannelSet, S: Sequence[np.ndarray], k: int,
                         noise_var: float) -> float:
    Y = bc_interference_matrix(channels, S, k, noise_var, InterferenceMode.LINEAR)
    return _logdet_identity_plus(_whitened_gain(Y, channels.bc(k), S[k]))


def _covs(filters):
    return [f @ f.conj().T for f in filters]


def mac_mmse_receiver(channels: ChannelSet, T: Sequence[np.ndarray], k: int,
                      noise_var: float,
                      mode: InterferenceMode = InterferenceMode.SIC) -> np.ndarray:
    """MMSE receiver ``G_k = T_k^H H_k^H (X_k + H_k T_k T_k^H H_k^H)^{-1}``.

    With SIC the inverted matrix covers users ``l <= k``; without
    cancellation it covers every user.
    """
    Q = _covs(T)
    X = mac_distortion_matrix(channels, Q, k, noise_var, mode)
    HT = channels.H[k] @ T[k]
    R = X + HT @ HT.conj().T
    Z = sla.cho_solve(sla.cho_factor(0.5 * (R + R.conj().T), lower=True), HT)
    return Z.conj().T


def bc_mmse_receiver(channels: ChannelSet, P: Sequence[np.ndarray], k: int,
                     noise_var: float,
                     mode: InterferenceMode = InterferenceMode.SIC) -> np.ndarray:
    """BC MMSE receiver ``B_k = P_k^H H_k (Y_k + H_k^H P_k P_k^H H_k)^{-1}``."""
    S = _covs(P)
    Y = bc_interference_matrix(channels, S, k, noise_var, mode)
    HP = channels.bc(k) @ P[k]
    R = Y + HP @ HP.conj().T
    Z = sla.cho_solve(sla.cho_factor(0.5 * (R + R.conj().T), lower=True), HP)
    return Z.conj().T


def mac_error_covariance(channels: ChannelSet, T: Sequence[np.ndarray], k: int,
                         noise_var: float,
                         mode: InterferenceMode = InterferenceMode.SIC) -> np.ndarray:
    """MMSE error covariance ``C_k = I - G_k H_k T_k`` of MAC user k."""
    G = mac_mmse_receiver(channels, T, k, noise_var, mode)
    C = np.eye(T[k].shape[1]) - G @ channels.H[k] @ T[k]
    return 0.5 * (C + C.conj().T)


def mac_error_covariance_inverse_form(channels: ChannelSet, T: Sequence[np.ndarray],
                                      k: int, noise_var: float,
                                      mode: InterferenceMode = InterferenceMode.SIC
                                      ) -> np.ndarray:
    """``C_k = [I + T_k^H H_k^H X_k^{-1} H_k T_k]^{-1}`` with user k excluded from ``X_k``."""
    X = mac_distortion_matrix(channels, _covs(T), k, noise_var, mode)
    HT = channels.H[k] @ T[k]
    A = HT.conj().T @ np.linalg.solve(X, HT)
    C = np.linalg.inv(np.eye(A.shape[0]) + 0.5 * (A + A.conj().T))
    return 0.5 * (C + C.conj().T)


def rate_from_error_cov(C: np.ndarray) -> float:
    """``-log2 det C`` for an error covariance with eigenvalues in ``(0, 1]``."""
    C = np.asarray(C)
    ev = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    if ev.size and ev[0] <= 0:
        raise NotPositiveDefiniteError(
            f"error covariance is not positive definite (eigenvalue {ev[0]:.3e})")
    return max(float(-np.sum(np.log(ev)) / _LN2), 0.0)


def _sinr(num, den, g, t):
    g_zero = not np.any(g)
    t_zero = not np.any(t)
    if g_zero and not t_zero:
        raise UndefinedSinrError("zero receive filter with a nonzero transmit filter")
    if t_zero or num == 0.0:
        return 0.0
    return float(num / den)


def _quad_rows(g, A):
    """``||g^T A||^2`` for a row filter ``g`` and a matrix ``A``."""
    v = g @ A
    return float(np.vdot(v, v).real)


def sinr_mac(channels: ChannelSet, T: Sequence[np.ndarray], G: Sequence[np.ndarray],
             k: int, i: int, noise_var: float,
             mode: InterferenceMode = InterferenceMode.SIC) -> float:
    """General MAC SINR of stream i of user k, intra-user interference included.

    Denominator ``g^T (X_k + sum_{m!=i} H_k t_m t_m^H H_k^H) g^*`` where
    ``X_k`` holds the noise and the interferers of the given mode. Terms
    are accumulated individually so that no cancellation occurs.
    """
    g = G[k][i]
    Hk = channels.H[k]
    t = T[k][:, i]
    num = abs(g @ Hk @ t) ** 2
    den = noise_var * float(np.vdot(g, g).real)
    for l in interferers(k, channels.K, mode, Domain.MAC):
        den += _quad_rows(g, channels.H[l] @ T[l])
    others = np.delete(T[k], i, axis=1)
    den += _quad_rows(g, Hk @ others)
    return _sinr(num, den, g, t)


def sinr_mac_simplified(channels: ChannelSet, T: Sequence[np.ndarray],
                        G: Sequence[np.ndarray], k: int, i: int, noise_var: float,
                        mode: InterferenceMode = InterferenceMode.SIC) -> float:
    """MAC SINR with the intra-user sum dropped (valid for decorrelated filters)."""
    g = G[k][i]
    t = T[k][:, i]
    num = abs(g @ channels.H[k] @ t) ** 2
    den = noise_var * float(np.vdot(g, g).real)
    for l in interferers(k, channels.K, mode, Domain.MAC):
        den += float(np.sum(np.abs(g @ channels.H[l] @ T[l]) ** 2))
    return _sinr(num, den, g, t)


def sinr_mac_closed_form(channels: ChannelSet, T: Sequence[np.ndarray], k: int, i: int,
                         noise_var: float,
                         mode: InterferenceMode = InterferenceMode.SIC) -> float:
    """``t^H H_k^H X_k^{-1} H_k t``: SINR of a decorrelated MMSE stream."""
    X = mac_distortion_matrix(channels, _covs(T), k, noise_var, mode)
    h = channels.H[k] @ T[k][:, i]
    return float(np.vdot(h, np.linalg.solve(X, h)).real)


def sinr_bc(channels: ChannelSet, P: Sequence[np.ndarray], B: Sequence[np.ndarray],
            k: int, i: int, noise_var: float,
            mode: InterferenceMode = InterferenceMode.SIC) -> float:
    """General BC SINR of stream i of user k.

    Denominator ``b^T (Y_k + sum_{m!=i} H_k^H p_m p_m^H H_k) b^*`` with
    ``Y_k`` built from ``S_l = P_l P_l^H`` of the BC interferers.
    """
    b = B[k][i]
    Hb = channels.bc(k)
    p = P[k][:, i]
    num = abs(b @ Hb @ p) ** 2
    den = noise_var * float(np.vdot(b, b).real)
    bH = b @ Hb
    for l in interferers(k, channels.K, mode, Domain.BC):
        den += _quad_rows(bH, P[l])
    den += _quad_rows(bH, np.delete(P[k], i, axis=1))
    return _sinr(num, den, b, p)


def stream_sinrs_mac(channels, T, G, noise_var, mode=InterferenceMode.SIC) -> list:
    return [np.array([sinr_mac(channels, T, G, k, i, noise_var, mode)
                      for i in range(T[k].shape[1])]) for k in range(channels.K)]


def stream_sinrs_bc(channels, P, B, noise_var, mode=InterferenceMode.SIC) -> list:
    return [np.array([sinr_bc(channels, P, B, k, i, noise_var, mode)
                      for i in range(P[k].shape[1])]) for k in range(channels.K)]


def _streamwise_report(sinrs, power, domain) -> RateReport:
    rates = [float(np.sum(np.log1p(s)) / _LN2) for s in sinrs]
    return RateReport(per_stream_sinr=sinrs, per_user_rate=rates,
                      sum_rate=float(sum(rates)), sum_power=power, domain=domain)


def report(channels: ChannelSet,
           data: Union[MacFilterSet, BcFilterSet, CovarianceSet],
           noise_var: float,
           mode: InterferenceMode = InterferenceMode.SIC) -> RateReport:
    """Aggregate SINRs, rates and power of one domain.

    Filter sets give stream-wise SINRs and per-user rates
    ``sum_i log2(1 + SINR_{k,i})``. Missing receivers are replaced by MMSE
    receivers of the given mode (without decorrelation). Covariance sets
    give joint-decoding log-determinant rates and no stream SINRs.
    """
    K = channels.K
    if isinstance(data, MacFilterSet):
        T = data.T
        G = data.G
        if G is None:
            G = [mac_mmse_receiver(channels, T, k, noise_var, mode) for k in range(K)]
        return _streamwise_report(stream_sinrs_mac(channels, T, G, noise_var, mode),
                                  data.sum_power, Domain.MAC)
    if isinstance(data, BcFilterSet):
        P = data.P
        B = data.B
        if B is None:
            B = [bc_mmse_receiver(channels, P, k, noise_var, mode) for k in range(K)]
        return _streamwise_report(stream_sinrs_bc(channels, P, B, noise_var, mode),
                                  data.sum_power, Domain.BC)
    if isinstance(data, CovarianceSet):
        if data.domain is Domain.MAC:
            fn = mac_rate_sic if mode is InterferenceMode.SIC else mac_rate_linear_joint
        else:
            fn = bc_rate_dpc if mode is InterferenceMode.SIC else bc_rate_linear_joint
        rates = [fn(channels, data.matrices, k, noise_var) for k in range(K)]
        return RateReport(per_stream_sinr=(), per_user_rate=rates, sum_rate=sum(rates),
                          sum_power=data.sum_power, domain=data.domain)
    raise DualityError(f"cannot report on {type(data).__name__}")
