import numpy as np
import pytest

from mimo_duality import ChannelSet, SystemDimensions


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_system(rng, K=3, N=4, r=None, L=None, power=4.0):
    """Random channels and precoders with total precoder power ``power``."""
    r = r or [2] * K
    L = L or [min(x, N) for x in r]
    H = [crandn(rng, N, rk) for rk in r]
    T = [crandn(rng, rk, lk) for rk, lk in zip(r, L)]
    c = np.sqrt(power / sum(np.vdot(t, t).real for t in T))
    return ChannelSet(H), [t * c for t in T]


def random_unitary(rng, n):
    q, rr = np.linalg.qr(crandn(rng, n, n))
    return q * (np.diag(rr) / np.abs(np.diag(rr)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar():
    """K = N = r = L = 1, h = t = 1, unit noise."""
    dims = SystemDimensions(K=1, N=1, r=[1], L=[1], noise_var=1.0)
    return dims, ChannelSet([np.array([[1.0]])]), [np.array([[1.0]])]


# Acceptance criteria register one line each; printed after the run.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
