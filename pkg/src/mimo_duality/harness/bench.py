"""Timing comparison of the serial covariance conversion and the filter conversion."""

from __future__ import annotations

import csv
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional

import numpy as np

from .. import duality_sic as ds
from ..duality_covariance import mac_to_bc_covariance
from ..exceptions import DualityError
from ..model import SystemDimensions
from .scenario import generate_random

__all__ = ["BENCH_HEADER", "cmd_bench", "bench_rows_to_csv", "max_filter_difference"]

BENCH_HEADER = ("method", "K", "N", "sum_L", "trials", "median_ms")
EQUIVALENCE_TOL = 1e-12


def max_filter_difference(a: ds.ConversionResult, b: ds.ConversionResult) -> float:
    """Largest relative entrywise difference between two BC filter sets and scalings."""
    worst = 0.0
    pairs = list(zip(a.filters.P, b.filters.P)) + list(zip(a.filters.B, b.filters.B))
    for x, y in pairs:
        scale = max(np.max(np.abs(x)), np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(x - y))) / scale)
    sa, sb = a.scaling.alpha_sq, b.scaling.alpha_sq
    if sa.size:
        worst = max(worst, float(np.max(np.abs(sa - sb)) / max(np.max(np.abs(sa)), 1e-300)))
    return worst


def _median_ms(fn, trials: int) -> float:
    times = []
    for _ in range(trials):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def cmd_bench(sweep: Iterable[SystemDimensions], trials: int = 5, parallel: bool = True,
              workers: Optional[int] = None, seed: int = 0,
              power_budget: float = 10.0) -> list:
    """Median wall-clock time per conversion for every system in ``sweep``.

    Methods are ``covariance_serial`` (serial covariance loop),
    ``filter_serial`` and, with ``parallel``, ``filter_parallel`` (per-user
    and per-stream phases on a thread pool). The parallel output is
    checked against the serial output before it is timed.

    Returns
    -------
    list of tuple
        Rows matching :data:`BENCH_HEADER`.

    Raises
    ------
    DualityError
        If the serial and parallel filter paths disagree beyond 1e-12.
    """
    if trials < 1:
        raise DualityError("trials must be at least 1")
    rows = []
    pool = ThreadPoolExecutor(max_workers=workers) if parallel else None
    try:
        for dims in sweep:
            sc = generate_random(dims, seed, power_budget)
            ch = sc.channels
            T = sc.mac_filters.T
            s2 = dims.noise_var
            Q = [t @ t.conj().T for t in T]
            sum_L = sum(dims.L)
            ms = _median_ms(lambda: mac_to_bc_covariance(ch, Q, s2), trials)
            rows.append(("covariance_serial", dims.K, dims.N, sum_L, trials, ms))
            ms = _median_ms(lambda: ds.mac_to_bc(ch, T, s2), trials)
            rows.append(("filter_serial", dims.K, dims.N, sum_L, trials, ms))
            if pool is not None:
                diff = max_filter_difference(ds.mac_to_bc(ch, T, s2),
                                             ds.mac_to_bc(ch, T, s2, executor=pool))
                if diff > EQUIVALENCE_TOL:
                    raise DualityError(
                        f"parallel and serial filter paths differ by {diff:.3e} "
                        f"(K={dims.K}, N={dims.N})")
                ms = _median_ms(lambda: ds.mac_to_bc(ch, T, s2, executor=pool), trials)
                rows.append(("filter_parallel", dims.K, dims.N, sum_L, trials, ms))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def bench_rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for method, K, N, sum_L, trials, ms in rows:
        w.writerow([method, K, N, sum_L, trials, f"{ms:.6f}"])
    return buf.getvalue()
