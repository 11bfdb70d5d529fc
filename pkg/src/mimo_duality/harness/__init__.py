"""Scenario generation, verification suite and benchmarks behind the CLI."""

from .bench import BENCH_HEADER, cmd_bench
from .scenario import Scenario, generate_random, load_scenario, sample_dims, save_scenario
from .verify import Tolerances, VerificationReport, cmd_verify, convert

__all__ = ["BENCH_HEADER", "cmd_bench", "Scenario", "generate_random", "load_scenario",
           "sample_dims", "save_scenario", "Tolerances", "VerificationReport", "cmd_verify",
           "convert"]
