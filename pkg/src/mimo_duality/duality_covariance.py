"""Serial covariance-based MAC-to-BC conversion (baseline and cross-check).

BC covariances are produced from user K-1 down to user 0, because ``S_k``
depends on every ``S_l`` with ``l > k`` through ``Y_k``. For user k:

* ``Y_k = s2 I + sum_{l>k} H_k^H S_l H_k = F_k^H F_k``
* ``X_k = s2 I + sum_{l<k} H_l Q_l H_l^H = L_k L_k^H``
* ``L_k^{-1} H_k F_k^{-1} = U_k D_k V_k^H`` (reduced SVD)
* ``Z_k = U_k V_k^H F_k Q_k F_k^H V_k U_k^H``
* ``S_k = L_k^{-H} Z_k L_k^{-1}``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .duality_sic import mac_to_bc
from .exceptions import CrossValidationError, DualityError
from .model import ChannelSet, CovarianceSet, Domain
from .numerics import RANK_RTOL, cholesky, reduced_svd
from .rates import (
    InterferenceMode,
    bc_interference_matrix,
    bc_rate_dpc,
    mac_interference_matrix,
    mac_rate_sic,
)

__all__ = ["CovarianceStep", "mac_to_bc_covariance", "covariance_steps", "cross_validate",
           "CrossValidation"]


@dataclass(frozen=True)
class CovarianceStep:
    """Intermediate quantities of one user's conversion step."""

    k: int
    Y: np.ndarray
    F: np.ndarray
    L: np.ndarray
    effective_channel: np.ndarray
    Z: np.ndarray
    S: np.ndarray


def covariance_steps(channels: ChannelSet, Q: Sequence[np.ndarray], noise_var: float,
                     rank_tol: float = RANK_RTOL) -> list:
    """Run the serial conversion and return the per-user steps, ordered by user index."""
    Q = [np.asarray(q, dtype=complex) for q in Q]
    CovarianceSet(Domain.MAC, Q).check()
    K = channels.K
    S = [None] * K
    steps = [None] * K
    for k in range(K - 1, -1, -1):
        Hk = channels.H[k]
        Y = bc_interference_matrix(channels, [s if s is not None else 0 for s in S], k,
                                   noise_var, InterferenceMode.SIC)
        F = cholesky(Y).L.conj().T
        X = mac_interference_matrix(channels, Q, k, noise_var, InterferenceMode.SIC)
        Lk = cholesky(X).L
        # L^{-1} H F^{-1} through two triangular solves.
        A = sla.solve_triangular(Lk, Hk, lower=True)
        Heff = sla.solve_triangular(F.T, A.T, lower=True).T
        svd = reduced_svd(Heff, rank_tol)
        UV = svd.U @ svd.V.conj().T
        FQF = F @ Q[k] @ F.conj().T
        Z = UV @ FQF @ UV.conj().T
        Z = 0.5 * (Z + Z.conj().T)
        # L^{-H} Z L^{-1}
        B = sla.solve_triangular(Lk, Z, lower=True, trans="C")
        Sk = sla.solve_triangular(Lk, B.conj().T, lower=True, trans="C").conj().T
        Sk = 0.5 * (Sk + Sk.conj().T)
        S[k] = Sk
        steps[k] = CovarianceStep(k=k, Y=Y, F=F, L=Lk, effective_channel=Heff, Z=Z, S=Sk)
    return steps


def mac_to_bc_covariance(channels: ChannelSet, Q: Sequence[np.ndarray], noise_var: float,
                         rank_tol: float = RANK_RTOL) -> CovarianceSet:
    """Convert MAC transmit covariances into BC covariances with the same rates.

    Raises
    ------
    NotHermitianError, NotPositiveDefiniteError
        If some ``Q_k`` is not Hermitian PSD.
    """
    steps = covariance_steps(channels, Q, noise_var, rank_tol)
    S = [st.S for st in steps]
    for st in steps:
        Y = bc_interference_matrix(channels, S, st.k, noise_var, InterferenceMode.SIC)
        if not np.allclose(Y, st.Y, rtol=1e-10, atol=1e-12 * noise_var):
            raise DualityError(f"Y_{st.k} rebuilt from the returned S differs from the loop")
    return CovarianceSet(Domain.BC, S)


@dataclass(frozen=True)
class CrossValidation:
    mac_rates: tuple
    filter_bc_rates: tuple
    covariance_bc_rates: tuple
    mac_power: float
    filter_bc_power: float
    covariance_bc_power: float
    max_rate_gap: float


def cross_validate(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float,
                   rate_tol: float = 1e-7, power_rtol: float = 1e-9,
                   executor: Optional[object] = None) -> CrossValidation:
    """Compare the covariance baseline with the filter-based SIC conversion.

    Raises
    ------
    CrossValidationError
        If the BC rate tuples differ by more than ``rate_tol`` bits or a BC
        power exceeds the MAC power beyond ``power_rtol``.
    """
    Q = [t @ t.conj().T for t in T]
    K = channels.K
    S = mac_to_bc_covariance(channels, Q, noise_var)
    cov_rates = tuple(bc_rate_dpc(channels, S.matrices, k, noise_var) for k in range(K))
    mac_rates = tuple(mac_rate_sic(channels, Q, k, noise_var) for k in range(K))
    res = mac_to_bc(channels, T, noise_var, executor=executor)
    filt_rates = res.bc_report.per_user_rate
    gap = float(np.max(np.abs(np.subtract(cov_rates, filt_rates)))) if K else 0.0
    mac_power = float(sum(np.trace(q).real for q in Q))
    out = CrossValidation(mac_rates=mac_rates, filter_bc_rates=tuple(filt_rates),
                          covariance_bc_rates=cov_rates, mac_power=mac_power,
                          filter_bc_power=res.bc_report.sum_power,
                          covariance_bc_power=S.sum_power, max_rate_gap=gap)
    if gap > rate_tol:
        raise CrossValidationError(f"BC rate tuples differ by {gap:.3e} bits")
    limit = mac_power * (1 + power_rtol) + power_rtol
    if out.filter_bc_power > limit or out.covariance_bc_power > limit:
        raise CrossValidationError("a BC power exceeds the MAC power")
    return out
