"""Verification suite run by ``mimo-duality verify``."""

from __future__ import annotations

import json
import time
from concurrent.futures import Executor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import duality_linear as dl
from .. import duality_sic as ds
from .._framework import offdiag_ratio
from ..duality_covariance import mac_to_bc_covariance
from ..exceptions import DualityError
from ..rates import (
    InterferenceMode,
    bc_rate_dpc,
    bc_rate_dpc_quotient,
    mac_error_covariance,
    mac_rate_linear_joint,
    mac_rate_linear_joint_direct,
    mac_rate_sic,
    mac_rate_sic_quotient,
    rate_from_error_cov,
)
from .scenario import Scenario

__all__ = ["Check", "VerificationReport", "cmd_verify", "convert", "Tolerances"]


@dataclass(frozen=True)
class Tolerances:
    sinr: float = 1e-9
    power: float = 1e-9
    rate: float = 1e-8
    decorrelation: float = 1e-9
    rate_identity: float = 1e-9
    cross: float = 1e-7
    alpha_neg: float = 1e-12
    dominance: float = 1e-12
    covariance: float = 1e-10


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    tolerance: float

    def to_dict(self):
        # JSON has no inf/nan; a non-finite residual is written as its repr.
        res = self.residual if np.isfinite(self.residual) else repr(self.residual)
        return {"name": self.name, "passed": self.passed, "residual": res,
                "tolerance": self.tolerance}


@dataclass
class VerificationReport:
    mode: str
    checks: list = field(default_factory=list)
    timing_ms: Optional[dict] = field(default_factory=dict)
    power: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, residual: float, tolerance: float) -> None:
        residual = float(residual)
        ok = bool(np.isfinite(residual) and residual <= tolerance)
        self.checks.append(Check(name, ok, residual, float(tolerance)))

    def failed(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        d = {"passed": self.passed, "mode": self.mode,
             "checks": [c.to_dict() for c in self.checks],
             "power": self.power, "rates": self.rates}
        if self.timing_ms is not None:
            d["timing_ms"] = self.timing_ms
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)


def convert(scenario: Scenario, direction: str, mode: InterferenceMode,
            executor: Optional[Executor] = None) -> ds.ConversionResult:
    """Dispatch a filter conversion by direction and mode."""
    ch = scenario.channels
    s2 = scenario.dims.noise_var
    if direction == "mac-to-bc":
        if scenario.mac_filters is None:
            raise DualityError("scenario has no mac_filters to convert")
        fn = ds.mac_to_bc if mode is InterferenceMode.SIC else dl.mac_to_bc_linear
        return fn(ch, scenario.mac_filters.T, s2, G=scenario.mac_filters.G, executor=executor)
    if direction == "bc-to-mac":
        if scenario.bc_filters is None:
            raise DualityError("scenario has no bc_filters to convert")
        fn = ds.bc_to_mac if mode is InterferenceMode.SIC else dl.bc_to_mac_linear
        return fn(ch, scenario.bc_filters.P, s2, B=scenario.bc_filters.B, executor=executor)
    raise DualityError(f"unknown direction {direction!r}")


def _flat(report):
    return np.concatenate([np.asarray(s, dtype=float) for s in report.per_stream_sinr])


def _rel_gap(a, b, mask):
    a = a[mask]
    b = b[mask]
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.abs(a), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / scale))


def _rel(x, ref):
    return abs(x - ref) / ref if ref > 0 else abs(x - ref)


def m_matrix_residuals(M: np.ndarray) -> dict:
    """Sign and column-dominance residuals of a scaling matrix (0 when satisfied)."""
    M = np.asarray(M)
    if M.size == 0:
        return {"offdiag_sign": 0.0, "diag_sign": 0.0, "column_dominance": 0.0}
    d = np.diag(M)
    off = M - np.diag(d)
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    margin = d - np.sum(np.abs(off), axis=0)
    dom = np.maximum(-margin, 0.0) / np.maximum(np.abs(d), np.finfo(float).tiny)
    return {"offdiag_sign": max(float(np.max(off)), 0.0) / scale,
            "diag_sign": max(float(-np.min(d)), 0.0) / scale,
            "column_dominance": float(np.max(dom))}


def _mac_joint_rates(ch, T, s2, mode):
    Q = [t @ t.conj().T for t in T]
    fn = mac_rate_sic if mode is InterferenceMode.SIC else mac_rate_linear_joint
    return [fn(ch, Q, k, s2) for k in range(ch.K)]


def _error_cov_rates(ch, T, s2, mode):
    return [rate_from_error_cov(mac_error_covariance(ch, T, k, s2, mode))
            for k in range(ch.K)]


@contextmanager
def _timed(sink: dict, name: str):
    t0 = time.perf_counter()
    yield
    sink[name] = (time.perf_counter() - t0) * 1e3


def _check_mac_to_bc(rep, sc, mode, tol, timing, executor):
    ch = sc.channels
    s2 = sc.dims.noise_var
    T = [np.asarray(t) for t in sc.mac_filters.T]
    with _timed(timing, "mac_to_bc"):
        res = convert(sc, "mac-to-bc", mode, executor)
    dec = res.decorrelated
    mask = res.scaling.active_mask
    mac_rep, bc_rep = res.reports

    rep.add("sinr_equality", _rel_gap(_flat(mac_rep), _flat(bc_rep), mask), tol.sinr)
    mac_power = float(sum(np.vdot(t, t).real for t in T))
    rep.add("power_conservation", _rel(bc_rep.sum_power, mac_power), tol.power)

    joint = _mac_joint_rates(ch, T, s2, mode)
    rep.add("rate_tuple_equality",
            max(abs(a - b) for a, b in zip(bc_rep.per_user_rate, joint)), tol.rate)

    res_m = m_matrix_residuals(res.m_matrix.M)
    rep.add("m_matrix_offdiag_nonpositive", res_m["offdiag_sign"], 0.0)
    rep.add("m_matrix_diag_nonnegative", res_m["diag_sign"], 0.0)
    rep.add("m_matrix_column_dominance", res_m["column_dominance"], tol.dominance)
    rep.add("alpha_nonnegative", max(0.0, -float(np.min(res.scaling.alpha_sq))),
            tol.alpha_neg)

    if mode is InterferenceMode.SIC:
        diag = max(offdiag_ratio(g @ h @ t)
                   for g, h, t in zip(dec.G_prime, ch.H, dec.T_prime))
    else:
        diag = max(offdiag_ratio(W.conj().T @ mac_error_covariance(ch, T, k, s2, mode) @ W)
                   for k, W in enumerate(dec.W))
    rep.add("decorrelation_diagonality", diag, tol.decorrelation)

    before = _error_cov_rates(ch, T, s2, mode)
    after = _error_cov_rates(ch, dec.T_prime, s2, mode)
    rep.add("decorrelation_rate_invariance",
            max(abs(a - b) for a, b in zip(before, after)), tol.rate_identity)
    rep.add("streamwise_equals_joint",
            max(abs(a - b) for a, b in zip(mac_rep.per_user_rate, after)), tol.rate_identity)
    cov_gap = max(
        np.linalg.norm(tp @ tp.conj().T - t @ t.conj().T)
        / max(np.linalg.norm(t @ t.conj().T), np.finfo(float).tiny)
        for t, tp in zip(T, dec.T_prime))
    rep.add("transmit_covariance_unchanged", cov_gap, tol.covariance)

    Q = [t @ t.conj().T for t in T]
    S = [p @ p.conj().T for p in res.filters.P]
    forms = [abs(mac_rate_sic(ch, Q, k, s2) - mac_rate_sic_quotient(ch, Q, k, s2))
             for k in range(ch.K)]
    forms += [abs(bc_rate_dpc(ch, S, k, s2) - bc_rate_dpc_quotient(ch, S, k, s2))
              for k in range(ch.K)]
    forms += [abs(mac_rate_linear_joint(ch, Q, k, s2) - mac_rate_linear_joint_direct(ch, Q, k, s2))
              for k in range(ch.K)]
    rep.add("dual_form_agreement", max(forms), tol.rate_identity)

    if mode is InterferenceMode.LINEAR:
        X = dl.common_matrix(ch, T, s2)
        worst = 0.0
        for k in range(ch.K):
            HT = ch.H[k] @ T[k]
            C = np.eye(T[k].shape[1]) - HT.conj().T @ np.linalg.solve(X, HT)
            separate = float(-np.sum(np.log2(np.real(np.diag(C)))))
            worst = max(worst, separate - joint[k])
        rep.add("joint_ge_separate", max(worst, 0.0), tol.rate_identity)

    if mode is InterferenceMode.SIC:
        with _timed(timing, "covariance"):
            Scov = mac_to_bc_covariance(ch, Q, s2)
        cov_rates = [bc_rate_dpc(ch, Scov.matrices, k, s2) for k in range(ch.K)]
        rep.add("covariance_rate_equality",
                max(abs(a - b) for a, b in zip(cov_rates, joint)), tol.rate)
        rep.add("covariance_cross_validation",
                max(abs(a - b) for a, b in zip(cov_rates, bc_rep.per_user_rate)), tol.cross)
        rep.add("covariance_power_bound",
                max(0.0, Scov.sum_power - mac_power) / max(mac_power, np.finfo(float).tiny),
                tol.power)
        rep.power["bc_covariance"] = Scov.sum_power

    back = ds.run_bc_to_mac
    with _timed(timing, "round_trip"):
        rt = back(ch, res.filters.P, s2, mode, B=res.filters.B, executor=executor)
    rep.add("round_trip_rates",
            max(abs(a - b) for a, b in zip(rt.mac_report.per_user_rate, mac_rep.per_user_rate)),
            tol.rate)

    rep.power["mac"] = mac_power
    rep.power["bc"] = bc_rep.sum_power
    rep.rates["mac"] = list(mac_rep.per_user_rate)
    rep.rates["bc"] = list(bc_rep.per_user_rate)


def _check_bc_to_mac(rep, sc, mode, tol, timing, executor):
    with _timed(timing, "bc_to_mac"):
        res = convert(sc, "bc-to-mac", mode, executor)
    mac_rep, bc_rep = res.reports
    mask = res.scaling.active_mask
    rep.add("bc_to_mac_sinr_equality", _rel_gap(_flat(bc_rep), _flat(mac_rep), mask), tol.sinr)
    rep.add("bc_to_mac_power_conservation",
            _rel(mac_rep.sum_power, sc.bc_filters.sum_power), tol.power)
    rep.add("bc_to_mac_rate_equality",
            max(abs(a - b) for a, b in zip(mac_rep.per_user_rate, bc_rep.per_user_rate)),
            tol.rate)
    dec = res.decorrelated
    diag = max(offdiag_ratio(b @ h.conj().T @ p)
               for b, h, p in zip(dec.B_prime, sc.channels.H, dec.P_prime))
    rep.add("bc_to_mac_decorrelation_diagonality", diag, tol.decorrelation)
    res_m = m_matrix_residuals(res.m_matrix.M)
    rep.add("bc_to_mac_m_matrix_offdiag_nonpositive", res_m["offdiag_sign"], 0.0)
    rep.add("bc_to_mac_m_matrix_column_dominance", res_m["column_dominance"], tol.dominance)
    fwd = ds.run_mac_to_bc(sc.channels, res.filters.T, sc.dims.noise_var, mode,
                           receivers=None, decorrelator=_decorrelator(mode),
                           G=res.filters.G, executor=executor)
    rep.add("bc_round_trip_rates",
            max(abs(a - b) for a, b in zip(fwd.bc_report.per_user_rate, bc_rep.per_user_rate)),
            tol.rate)
    rep.power["bc_input"] = sc.bc_filters.sum_power
    rep.power["mac_from_bc"] = mac_rep.sum_power
    rep.rates["bc_input"] = list(bc_rep.per_user_rate)
    rep.rates["mac_from_bc"] = list(mac_rep.per_user_rate)


def _decorrelator(mode):
    return ds.decorrelate if mode is InterferenceMode.SIC else dl.decorrelate_linear


def cmd_verify(scenario: Scenario, mode: Optional[InterferenceMode] = None,
               tolerances: Tolerances = Tolerances(), timing: bool = True,
               executor: Optional[Executor] = None) -> VerificationReport:
    """Run every invariant check on a scenario.

    The scenario is validated first; invalid input raises instead of
    producing a report. Failing checks are recorded, not raised.
    """
    scenario.validate()
    if scenario.mac_filters is None and scenario.bc_filters is None:
        raise DualityError("scenario needs mac_filters or bc_filters to verify")
    mode = mode or scenario.mode
    rep = VerificationReport(mode=mode.value)
    t = {}
    if scenario.mac_filters is not None:
        _check_mac_to_bc(rep, scenario, mode, tolerances, t, executor)
    if scenario.bc_filters is not None:
        _check_bc_to_mac(rep, scenario, mode, tolerances, t, executor)
    rep.timing_ms = t if timing else None
    return rep
