"""Scenarios: seeded generation and lossless JSON serialization.

JSON layout::

    {
      "dims": {"K": 2, "N": 4, "r": [2, 1], "L": [2, 1], "noise_var": 1.0},
      "channels": [H_0, H_1],
      "mac_filters": {"T": [T_0, T_1], "G": null},      # optional
      "bc_filters": {"P": [P_0, P_1], "B": null},       # optional
      "seed": 7,
      "mode": "sic"
    }

A matrix is a list of rows and a complex entry is ``[re, im]``. Floats are
written with Python's shortest round-trip repr, so reading a file back
gives bit-identical arrays.

Random generation uses the counter-based Philox generator. The scenario
seed is expanded with ``SeedSequence(seed).spawn(K)``; user k draws, in this
order, its channel ``H_k``, its MAC precoder ``T_k`` and (optionally) its BC
precoder ``P_k`` from stream k only. The per-user streams are therefore
independent of each other and of the generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..exceptions import DualityError, DimensionError
from ..model import BcFilterSet, ChannelSet, MacFilterSet, SystemDimensions, validate
from ..rates import InterferenceMode

__all__ = [
    "Scenario",
    "generate_random",
    "sample_dims",
    "matrix_to_json",
    "matrix_from_json",
    "scenario_to_dict",
    "scenario_from_dict",
    "load_scenario",
    "save_scenario",
    "user_generators",
]


@dataclass(frozen=True)
class Scenario:
    dims: SystemDimensions
    channels: ChannelSet
    mac_filters: Optional[MacFilterSet] = None
    bc_filters: Optional[BcFilterSet] = None
    seed: int = 0
    mode: InterferenceMode = InterferenceMode.SIC

    def validate(self) -> None:
        validate(self.dims, self.channels, self.mac_filters, self.bc_filters)

    def with_noise_var(self, noise_var: float) -> "Scenario":
        return replace(self, dims=replace(self.dims, noise_var=noise_var))


def user_generators(seed: int, K: int) -> list:
    """One independent Philox generator per user."""
    children = np.random.SeedSequence(int(seed)).spawn(K)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with unit variance."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def _scale_to(filters, budget):
    power = sum(float(np.vdot(f, f).real) for f in filters)
    if budget == 0 or power == 0:
        return [np.zeros_like(f) for f in filters]
    c = np.sqrt(budget / power)
    return [f * c for f in filters]


def generate_random(dims: SystemDimensions, seed: int, power_budget: float,
                    mode: InterferenceMode = InterferenceMode.SIC,
                    bc: bool = False) -> Scenario:
    """Random scenario with i.i.d. unit-variance complex Gaussian channels.

    MAC precoders (and BC precoders when ``bc`` is set) are Gaussian,
    scaled so that their total power equals ``power_budget``.
    """
    dims.check()
    if not np.isfinite(power_budget) or power_budget < 0:
        raise DualityError("power budget must be finite and nonnegative")
    gens = user_generators(seed, dims.K)
    H, T, P = [], [], []
    for k, rng in enumerate(gens):
        H.append(_crandn(rng, (dims.N, dims.r[k])))
        T.append(_crandn(rng, (dims.r[k], dims.L[k])))
        if bc:
            P.append(_crandn(rng, (dims.N, dims.L[k])))
    T = _scale_to(T, power_budget)
    bc_filters = BcFilterSet(_scale_to(P, power_budget)) if bc else None
    return Scenario(dims=dims, channels=ChannelSet(H), mac_filters=MacFilterSet(T),
                    bc_filters=bc_filters, seed=int(seed), mode=mode)


def sample_dims(seed: int, K_range=(1, 4), N_range=(2, 8), r_range=(1, 4),
                noise_choices=(0.1, 1.0, 10.0)) -> SystemDimensions:
    """Draw system dimensions uniformly from the given inclusive ranges.

    Stream counts satisfy ``1 <= L_k <= min(r_k, N)``.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    K = int(rng.integers(K_range[0], K_range[1] + 1))
    N = int(rng.integers(N_range[0], N_range[1] + 1))
    r = [int(x) for x in rng.integers(r_range[0], r_range[1] + 1, size=K)]
    L = [int(rng.integers(1, min(rk, N) + 1)) for rk in r]
    noise_var = float(noise_choices[int(rng.integers(len(noise_choices)))])
    return SystemDimensions(K=K, N=N, r=r, L=L, noise_var=noise_var)


def matrix_to_json(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(rows, n_cols: Optional[int] = None) -> np.ndarray:
    try:
        a = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"malformed matrix: {exc}") from exc
    if a.size == 0:
        a = np.zeros((len(rows), n_cols or 0), dtype=complex)
    if a.ndim != 2:
        raise DimensionError("matrix rows have different lengths")
    return a


def _mats_from_json(items, cols) -> list:
    return [matrix_from_json(m, c) for m, c in zip(items, cols)]


def scenario_to_dict(sc: Scenario) -> dict:
    d = {
        "dims": {"K": sc.dims.K, "N": sc.dims.N, "r": list(sc.dims.r), "L": list(sc.dims.L),
                 "noise_var": sc.dims.noise_var},
        "channels": [matrix_to_json(h) for h in sc.channels.H],
        "mac_filters": None,
        "bc_filters": None,
        "seed": int(sc.seed),
        "mode": sc.mode.value,
    }
    if sc.mac_filters is not None:
        d["mac_filters"] = {
            "T": [matrix_to_json(t) for t in sc.mac_filters.T],
            "G": None if sc.mac_filters.G is None
            else [matrix_to_json(g) for g in sc.mac_filters.G],
        }
    if sc.bc_filters is not None:
        d["bc_filters"] = {
            "P": [matrix_to_json(p) for p in sc.bc_filters.P],
            "B": None if sc.bc_filters.B is None
            else [matrix_to_json(b) for b in sc.bc_filters.B],
        }
    return d


def scenario_from_dict(d: dict) -> Scenario:
    """Parse and validate a scenario dictionary.

    Raises
    ------
    DualityError
        On missing keys, malformed matrices or violated invariants.
    """
    try:
        dd = d["dims"]
        dims = SystemDimensions(K=dd["K"], N=dd["N"], r=dd["r"], L=dd["L"],
                                noise_var=dd["noise_var"])
        dims.check()
        channels = ChannelSet(_mats_from_json(d["channels"], dims.r))
        mac = bc = None
        if d.get("mac_filters") is not None:
            mf = d["mac_filters"]
            T = _mats_from_json(mf["T"], dims.L)
            G = mf.get("G")
            G = None if G is None else _mats_from_json(G, [dims.N] * dims.K)
            mac = MacFilterSet(T, G)
        if d.get("bc_filters") is not None:
            bf = d["bc_filters"]
            P = _mats_from_json(bf["P"], dims.L)
            B = bf.get("B")
            B = None if B is None else _mats_from_json(B, dims.r)
            bc = BcFilterSet(P, B)
        mode = InterferenceMode(d.get("mode", "sic"))
        seed = int(d.get("seed", 0))
    except KeyError as exc:
        raise DualityError(f"scenario is missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DualityError):
            raise
        raise DualityError(f"malformed scenario: {exc}") from exc
    sc = Scenario(dims=dims, channels=channels, mac_filters=mac, bc_filters=bc,
                  seed=seed, mode=mode)
    sc.validate()
    return sc


def save_scenario(sc: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), allow_nan=False) + "\n")


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DualityError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(d)
