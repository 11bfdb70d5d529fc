"""Filter-based MAC/BC conversion for linear transceivers without cancellation.

Every user sees interference from all other users. The MAC MMSE receivers
share one matrix ``X = s2 I + sum_l H_l T_l T_l^H H_l^H``, which is factored
once per call. The scaling system is a full M-matrix and is solved by LU
factorization.
"""

from __future__ import annotations

import collections
from concurrent.futures import Executor
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import _framework as fw
from .duality_sic import (
    ConversionResult,
    DecorrelatedMac,
    MMatrix,
    _m_from_mac,
    run_bc_to_mac,
    run_mac_to_bc,
)
from .model import ChannelSet, ScalingSolution
from .numerics import solve_lu
from .rates import InterferenceMode, mac_interference_matrix

__all__ = [
    "counters",
    "common_matrix",
    "mmse_receivers_linear",
    "decorrelate_linear",
    "build_m_matrix_linear",
    "solve_scaling_linear",
    "mac_to_bc_linear",
    "bc_to_mac_linear",
]

_LIN = InterferenceMode.LINEAR

# Instrumentation: number of factorizations of the common MMSE matrix.
counters = collections.Counter()


def common_matrix(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float) -> np.ndarray:
    """``X = s2 I + sum_l H_l T_l T_l^H H_l^H`` over every user."""
    Q = [t @ t.conj().T for t in T]
    return mac_interference_matrix(channels, Q, 0, noise_var, _LIN)


def mmse_receivers_linear(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float,
                          executor: Optional[Executor] = None) -> list:
    """MMSE receivers ``G_k = T_k^H H_k^H X^{-1}`` with one shared factorization of ``X``."""
    X = common_matrix(channels, T, noise_var)
    factor = sla.cho_factor(X, lower=True)
    counters["common_factorizations"] += 1

    def one(k):
        return sla.cho_solve(factor, channels.H[k] @ T[k]).conj().T

    return fw.pmap(one, range(channels.K), executor)


def decorrelate_linear(channels: ChannelSet, T: Sequence[np.ndarray], G: Sequence[np.ndarray],
                       executor: Optional[Executor] = None) -> DecorrelatedMac:
    """Rotate every user by the eigenbasis of ``T_k^H H_k^H X^{-1} H_k T_k``.

    The product is formed as ``(H_k T_k)^H G_k^H``, which equals it for the
    receivers of :func:`mmse_receivers_linear`. Afterwards the error
    covariance ``W_k^H C_k W_k`` is diagonal.
    """
    def one(k):
        HT = channels.H[k] @ T[k]
        return fw.decorrelate_link(T[k], G[k], HT.conj().T @ G[k].conj().T)

    out = fw.pmap(one, range(channels.K), executor)
    return DecorrelatedMac(*(tuple(x) for x in zip(*out)))


def build_m_matrix_linear(channels: ChannelSet, dec: DecorrelatedMac,
                          noise_var: float) -> MMatrix:
    """Full scaling system: every pair of distinct users is coupled."""
    return _m_from_mac(channels, dec.T_prime, dec.G_prime, noise_var, _LIN)


def solve_scaling_linear(m: MMatrix) -> ScalingSolution:
    """Solve a reduced scaling system by LU factorization with partial pivoting."""
    return fw.solve_m(m, linear_solver=solve_lu)


def mac_to_bc_linear(channels: ChannelSet, T: Sequence[np.ndarray], noise_var: float,
                     G: Optional[Sequence[np.ndarray]] = None,
                     executor: Optional[Executor] = None) -> ConversionResult:
    """MAC-to-BC conversion without interference cancellation.

    Same interface as :func:`mimo_duality.duality_sic.mac_to_bc`.
    """
    return run_mac_to_bc(channels, T, noise_var, _LIN, mmse_receivers_linear,
                         decorrelate_linear, G=G, executor=executor)


def bc_to_mac_linear(channels: ChannelSet, P: Sequence[np.ndarray], noise_var: float,
                     B: Optional[Sequence[np.ndarray]] = None,
                     executor: Optional[Executor] = None) -> ConversionResult:
    """BC-to-MAC conversion without interference cancellation."""
    return run_bc_to_mac(channels, P, noise_var, _LIN, B=B, executor=executor)
