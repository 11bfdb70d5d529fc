"""Command line interface: ``mimo-duality {random,convert,verify,bench}``.

Exit status is 0 on success, 1 when a verification check fails and 2 on
any input error. Errors are written to stderr as one JSON object
``{"error": <exception class>, "message": <text>}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import DualityError
from .harness.bench import bench_rows_to_csv, cmd_bench
from .harness.scenario import (
    generate_random,
    load_scenario,
    matrix_to_json,
    sample_dims,
    save_scenario,
)
from .harness.verify import Tolerances, cmd_verify, convert
from .model import MacFilterSet, SystemDimensions
from .rates import InterferenceMode

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _InputError(message)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _mode(value: Optional[str]) -> Optional[InterferenceMode]:
    return None if value is None else InterferenceMode(value)


def _cmd_random(args) -> int:
    if args.K is None:
        dims = sample_dims(args.seed)
    else:
        r = args.r if args.r is not None else [args.N] * args.K
        L = args.L if args.L is not None else [min(rk, args.N) for rk in r]
        dims = SystemDimensions(K=args.K, N=args.N, r=r, L=L, noise_var=args.noise_var)
    sc = generate_random(dims, args.seed, args.power, mode=_mode(args.mode) or InterferenceMode.SIC,
                         bc=args.bc)
    if args.output:
        save_scenario(sc, args.output)
    else:
        from .harness.scenario import scenario_to_dict
        _emit(json.dumps(scenario_to_dict(sc), allow_nan=False), None)
    return EXIT_OK


def _filters_to_dict(f) -> dict:
    if isinstance(f, MacFilterSet):
        return {"T": [matrix_to_json(t) for t in f.T], "G": [matrix_to_json(g) for g in f.G]}
    return {"P": [matrix_to_json(p) for p in f.P], "B": [matrix_to_json(b) for b in f.B]}


def _cmd_convert(args) -> int:
    sc = load_scenario(args.scenario)
    mode = _mode(args.mode) or sc.mode
    res = convert(sc, args.direction, mode)
    out = {
        "direction": res.direction,
        "mode": mode.value,
        "filters": _filters_to_dict(res.filters),
        "reports": {"mac": res.mac_report.to_dict(), "bc": res.bc_report.to_dict()},
        "scaling": {"alpha_sq": [float(a) for a in res.scaling.alpha_sq],
                    "active_mask": [bool(m) for m in res.scaling.active_mask]},
    }
    _emit(json.dumps(out, indent=2, allow_nan=False), args.output)
    return EXIT_OK


def _cmd_verify(args) -> int:
    sc = load_scenario(args.scenario)
    rep = cmd_verify(sc, mode=_mode(args.mode), tolerances=Tolerances(sinr=args.tol_sinr),
                     timing=not args.no_timing)
    _emit(rep.to_json(), args.output)
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED


def _cmd_bench(args) -> int:
    sweep = [SystemDimensions(K=K, N=args.N, r=[args.r] * K, L=[args.L] * K,
                              noise_var=args.noise_var) for K in args.K]
    rows = cmd_bench(sweep, trials=args.trials, parallel=not args.no_parallel,
                     workers=args.workers, seed=args.seed)
    _emit(bench_rows_to_csv(rows), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mimo-duality",
                description="Convert MIMO filter sets between the MAC and the BC.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--mode", choices=[m.value for m in InterferenceMode], default=None,
                        help="interference mode (default: the scenario's own)")
        sp.add_argument("--output", "-o", default=None, help="write to file instead of stdout")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("random", help="generate a seeded random scenario")
    common(r)
    r.add_argument("--K", type=int, default=None, help="users (omit to sample dimensions)")
    r.add_argument("--N", type=int, default=4, help="base station antennas")
    r.add_argument("--r", type=int, nargs="+", default=None, help="antennas per user")
    r.add_argument("--L", type=int, nargs="+", default=None, help="streams per user")
    r.add_argument("--noise-var", type=float, default=1.0)
    r.add_argument("--power", type=float, default=10.0, help="total transmit power")
    r.add_argument("--bc", action="store_true", help="also draw BC precoders")
    r.set_defaults(func=_cmd_random)

    c = sub.add_parser("convert", help="convert filters between the domains")
    c.add_argument("scenario")
    common(c, seed=False)
    c.add_argument("--direction", choices=["mac-to-bc", "bc-to-mac"], default="mac-to-bc")
    c.set_defaults(func=_cmd_convert)

    v = sub.add_parser("verify", help="run the verification suite on a scenario")
    v.add_argument("scenario")
    common(v, seed=False)
    v.add_argument("--tol-sinr", type=float, default=1e-9)
    v.add_argument("--no-timing", action="store_true",
                   help="omit timings so that reports are byte-identical across runs")
    v.set_defaults(func=_cmd_verify)

    b = sub.add_parser("bench", help="time covariance and filter conversions (CSV)")
    common(b)
    b.add_argument("--K", type=int, nargs="+", default=[2, 4, 8])
    b.add_argument("--N", type=int, default=4)
    b.add_argument("--r", type=int, default=2)
    b.add_argument("--L", type=int, default=2)
    b.add_argument("--noise-var", type=float, default=1.0)
    b.add_argument("--trials", type=int, default=5)
    b.add_argument("--workers", type=int, default=None)
    b.add_argument("--no-parallel", action="store_true")
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (_InputError, DualityError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        err = {"error": type(exc).__name__.lstrip("_"), "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
