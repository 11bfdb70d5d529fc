from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import crandn, random_system
from mimo_duality import duality_sic as ds
from mimo_duality._framework import flip_stream, offdiag_ratio
from mimo_duality.exceptions import DualityError, NotHermitianError
from mimo_duality.model import ChannelSet, ScalingSolution, apply_user_order, permute_users
from mimo_duality.rates import (
    InterferenceMode,
    mac_error_covariance,
    mac_rate_sic,
    rate_from_error_cov,
    sinr_bc,
    sinr_mac,
)

SIC = InterferenceMode.SIC


def covs(T):
    return [t @ t.conj().T for t in T]


def mse(ch, T, G, k, s2):
    """E||s_k - G y||^2 with users l <= k received."""
    R = s2 * np.eye(ch.N) + sum(ch.H[l] @ T[l] @ T[l].conj().T @ ch.H[l].conj().T
                                for l in range(k + 1))
    A = G @ ch.H[k] @ T[k]
    return float(np.trace(np.eye(A.shape[0]) - A - A.conj().T + G @ R @ G.conj().T).real)


class TestScalarChain:
    """h = t = 1, unit noise: G = 1/2, alpha^2 = 4, p = 1, b = 1/2."""

    def test_receiver(self, scalar):
        _, ch, T = scalar
        assert np.allclose(ds.mmse_receivers_sic(ch, T, 1.0)[0], [[0.5]])

    def test_decorrelation_is_trivial(self, scalar):
        _, ch, T = scalar
        dec = ds.decorrelate(ch, T, ds.mmse_receivers_sic(ch, T, 1.0))
        assert np.allclose(dec.W[0], [[1.0]])

    def test_m_matrix(self, scalar):
        _, ch, T = scalar
        dec = ds.decorrelate(ch, T, ds.mmse_receivers_sic(ch, T, 1.0))
        m = ds.build_m_matrix_sic(ch, dec, 1.0)
        assert np.allclose(m.M, [[0.25]]) and np.allclose(m.rhs, [1.0])

    def test_full_chain(self, scalar):
        _, ch, T = scalar
        res = ds.mac_to_bc(ch, T, 1.0)
        assert np.allclose(res.scaling.alpha_sq, [4.0], rtol=1e-14)
        assert np.allclose(res.filters.P[0], [[1.0]], rtol=1e-14)
        assert np.allclose(res.filters.B[0], [[0.5]], rtol=1e-14)
        assert np.isclose(res.bc_report.per_stream_sinr[0][0], 1.0, rtol=1e-14)
        assert np.isclose(res.bc_report.per_user_rate[0], 1.0, rtol=1e-14)
        assert np.isclose(res.bc_report.sum_power, 1.0, rtol=1e-14)

    def test_round_trip(self, scalar):
        _, ch, T = scalar
        res = ds.mac_to_bc(ch, T, 1.0)
        back = ds.bc_to_mac(ch, res.filters.P, 1.0, B=res.filters.B)
        assert np.allclose(back.filters.T[0], [[1.0]]) and np.allclose(back.filters.G[0], [[0.5]])
        assert np.isclose(back.mac_report.per_user_rate[0], 1.0)


class TestReceivers:
    def test_zero_precoders(self, rng):
        ch, T = random_system(rng)
        G = ds.mmse_receivers_sic(ch, [np.zeros_like(t) for t in T], 1.0)
        assert all(not np.any(g) for g in G)

    def test_error_covariance_psd(self, rng):
        ch, T = random_system(rng)
        G = ds.mmse_receivers_sic(ch, T, 1.0)
        for k in range(3):
            C = np.eye(2) - G[k] @ ch.H[k] @ T[k]
            assert np.allclose(C, C.conj().T, atol=1e-12)
            ev = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
            assert ev.min() > 0 and ev.max() <= 1 + 1e-12

    def test_minimizes_mse(self, rng):
        ch, T = random_system(rng, K=2)
        G = ds.mmse_receivers_sic(ch, T, 1.0)
        for k in range(2):
            base = mse(ch, T, G[k], k, 1.0)
            for _ in range(20):
                D = 1e-3 * crandn(rng, *G[k].shape)
                assert mse(ch, T, G[k] + D, k, 1.0) > base


class TestDecorrelate:
    def test_already_diagonal(self):
        # H = I, T diagonal with distinct gains: G H T is diagonal descending.
        ch = ChannelSet([np.eye(2)])
        T = [np.diag([2.0, 1.0])]
        dec = ds.decorrelate(ch, T, ds.mmse_receivers_sic(ch, T, 1.0))
        assert np.allclose(np.abs(dec.W[0]), np.eye(2))

    def test_invariants(self, rng):
        ch, T = random_system(rng, K=3, r=[3, 2, 2], L=[3, 2, 1])
        G = ds.mmse_receivers_sic(ch, T, 1.0)
        dec = ds.decorrelate(ch, T, G)
        for k in range(3):
            W = dec.W[k]
            assert np.allclose(W.conj().T @ W, np.eye(W.shape[0]), atol=1e-10)
            assert offdiag_ratio(dec.G_prime[k] @ ch.H[k] @ dec.T_prime[k]) <= 1e-9
            assert np.allclose(dec.T_prime[k] @ dec.T_prime[k].conj().T, T[k] @ T[k].conj().T,
                               atol=1e-10 * np.linalg.norm(T[k]) ** 2)
            before = rate_from_error_cov(mac_error_covariance(ch, T, k, 1.0))
            after = rate_from_error_cov(mac_error_covariance(ch, dec.T_prime, k, 1.0))
            assert abs(before - after) < 1e-9

    def test_rejects_non_mmse_receivers(self, rng):
        ch, T = random_system(rng, K=2)
        G = [crandn(rng, 2, 4) for _ in range(2)]
        with pytest.raises(NotHermitianError):
            ds.decorrelate(ch, T, G)


class TestMMatrix:
    def _dec(self, ch, T, s2=1.0):
        return ds.decorrelate(ch, T, ds.mmse_receivers_sic(ch, T, s2))

    def test_single_stream(self, rng):
        ch, T = random_system(rng, K=1, r=[1], L=[1])
        dec = self._dec(ch, T, 0.3)
        m = ds.build_m_matrix_sic(ch, dec, 0.3)
        g, t = dec.G_prime[0], dec.T_prime[0]
        assert np.allclose(m.M, [[0.3 * np.vdot(g, g).real]])
        assert np.allclose(m.rhs, [0.3 * np.vdot(t, t).real])

    def test_all_zero_precoders_leave_empty_system(self, rng):
        ch, T = random_system(rng)
        dec = self._dec(ch, [np.zeros_like(t) for t in T])
        m = ds.build_m_matrix_sic(ch, dec, 1.0)
        assert not np.any(m.M)
        reduced, mask = ds.remove_zero_streams(m, dec)
        assert reduced.M.shape == (0, 0) and not mask.any()
        res = ds.mac_to_bc(ch, [np.zeros_like(t) for t in T], 1.0)
        assert res.bc_report.sum_power == 0 and all(not np.any(p) for p in res.filters.P)

    def test_entry_accumulation(self, rng):
        ch, T = random_system(rng, K=2, r=[2, 3], L=[2, 2])
        s2 = 0.8
        dec = self._dec(ch, T, s2)
        M = ds.build_m_matrix_sic(ch, dec, s2).M
        streams = [(0, 0), (0, 1), (1, 0), (1, 1)]
        for row, (b, m) in enumerate(streams):
            g = dec.G_prime[b][m]
            diag = s2 * np.vdot(g, g).real
            for col, (a, i) in enumerate(streams):
                if a < b:
                    diag += abs(g @ ch.H[a] @ dec.T_prime[a][:, i]) ** 2
                if col != row:
                    expect = 0.0
                    if a > b:
                        expect = -abs(dec.G_prime[a][i] @ ch.H[b] @ dec.T_prime[b][:, m]) ** 2
                    assert np.isclose(M[row, col], expect, rtol=1e-12, atol=1e-15)
            assert np.isclose(M[row, row], diag, rtol=1e-12)

    def test_structure(self, rng):
        ch, T = random_system(rng, K=3, r=[2, 2, 1], L=[2, 1, 1])
        m = ds.build_m_matrix_sic(ch, self._dec(ch, T), 1.0)
        M = m.M
        assert m.structure == "upper"
        assert np.all(np.tril(M, -1) == 0)
        off = M - np.diag(np.diag(M))
        assert np.all(off <= 0) and np.all(np.diag(M) >= 0)
        assert np.all(np.diag(M) + off.sum(axis=0) > 0)


class TestZeroStreams:
    def test_no_zero_streams(self, rng):
        ch, T = random_system(rng)
        dec = ds.decorrelate(ch, T, ds.mmse_receivers_sic(ch, T, 1.0))
        _, mask = ds.remove_zero_streams(ds.build_m_matrix_sic(ch, dec, 1.0), dec)
        assert mask.all()

    def test_zero_column(self, rng):
        ch, T = random_system(rng)
        T[1][:, 1] = 0
        res = ds.mac_to_bc(ch, T, 1.0)
        assert res.scaling.active_mask.sum() == 5
        k, i = divmod(int(np.flatnonzero(~res.scaling.active_mask)[0]), 2)
        assert k == 1
        assert not np.any(res.filters.P[1][:, i]) and not np.any(res.filters.B[1][i])

    def test_rank_one_two_streams(self, rng):
        ch, _ = random_system(rng)
        v = crandn(rng, 2, 1)
        T = [crandn(rng, 2, 2), np.hstack([v, 2j * v]), crandn(rng, 2, 2)]
        res = ds.mac_to_bc(ch, T, 1.0)
        assert res.scaling.active_mask.sum() == 5
        mac, bc = res.reports
        assert np.allclose(bc.per_user_rate, mac.per_user_rate, atol=1e-9)
        assert np.isclose(bc.sum_power, sum(np.vdot(t, t).real for t in T), rtol=1e-9)


class TestScaling:
    def test_decoupled(self):
        from mimo_duality._framework import MMatrix
        m = MMatrix(M=np.diag([2.0, 0.5]), rhs=[1.0, 3.0], L=(2,), structure="upper")
        assert np.allclose(ds.solve_scaling(m).alpha_sq, [0.5, 6.0])

    def test_random(self, rng):
        ch, T = random_system(rng, K=3)
        res = ds.mac_to_bc(ch, T, 1.0)
        M, a = res.m_matrix.M, res.scaling.alpha_sq
        assert np.all(a >= 0)
        assert np.linalg.norm(M @ a - res.m_matrix.rhs) <= 1e-10 * np.linalg.norm(res.m_matrix.rhs)
        gp = np.concatenate([np.sum(np.abs(g) ** 2, axis=1) for g in res.decorrelated.G_prime])
        assert np.isclose(a @ gp, sum(np.vdot(t, t).real for t in T), rtol=1e-9)

    def test_zero_alpha_on_active_stream(self):
        with pytest.raises(DualityError):
            flip_stream(np.ones(2), np.ones(2), 0.0)


class TestConversion:
    def test_sinr_equality_two_users(self, rng):
        ch, T = random_system(rng, K=2, r=[2, 2], L=[2, 1])
        res = ds.mac_to_bc(ch, T, 1.0)
        dec, bc = res.decorrelated, res.filters
        for k, L in enumerate([2, 1]):
            for i in range(L):
                a = sinr_mac(ch, dec.T_prime, dec.G_prime, k, i, 1.0)
                b = sinr_bc(ch, bc.P, bc.B, k, i, 1.0)
                assert np.isclose(a, b, rtol=1e-9)

    def test_single_user_capacity(self, rng):
        ch, T = random_system(rng, K=1, r=[3], L=[3])
        res = ds.mac_to_bc(ch, T, 0.5)
        Q = T[0] @ T[0].conj().T
        H = ch.H[0]
        cap = np.linalg.slogdet(np.eye(4) + H @ Q @ H.conj().T / 0.5)[1] / np.log(2)
        assert np.isclose(res.mac_report.per_user_rate[0], cap, rtol=1e-10)
        assert np.isclose(res.bc_report.per_user_rate[0], cap, rtol=1e-10)

    def test_large_random(self, rng):
        ch, T = random_system(rng, K=4, N=8, r=[3, 2, 4, 1], L=[2, 2, 3, 1], power=20)
        res = ds.mac_to_bc(ch, T, 0.1)
        mac, bc = res.reports
        for a, b in zip(mac.per_stream_sinr, bc.per_stream_sinr):
            assert np.allclose(a, b, rtol=1e-9)
        assert np.allclose(mac.per_user_rate, bc.per_user_rate, atol=1e-9)
        assert np.isclose(mac.sum_rate, bc.sum_rate, atol=1e-9)
        assert np.isclose(bc.sum_power, 20, rtol=1e-9)
        for k in range(4):
            assert abs(mac.per_user_rate[k] - mac_rate_sic(ch, covs(T), k, 0.1)) < 1e-9

    def test_round_trip(self, rng):
        ch, T = random_system(rng, K=3)
        res = ds.mac_to_bc(ch, T, 1.0)
        back = ds.bc_to_mac(ch, res.filters.P, 1.0, B=res.filters.B)
        for r in (res.bc_report, back.mac_report):
            assert np.allclose(r.per_user_rate, res.mac_report.per_user_rate, atol=1e-8)

    def test_bc_to_mac_power_and_sinr(self, rng):
        ch, _ = random_system(rng, K=3)
        P = [crandn(rng, 4, 2) for _ in range(3)]
        res = ds.bc_to_mac(ch, P, 1.0)
        mac, bc = res.reports
        assert np.isclose(mac.sum_power, sum(np.vdot(p, p).real for p in P), rtol=1e-9)
        for a, b in zip(mac.per_stream_sinr, bc.per_stream_sinr):
            assert np.allclose(a, b, rtol=1e-9)
        assert res.m_matrix.structure == "lower"
        assert np.all(np.triu(res.m_matrix.M, 1) == 0)

    def test_relabeling_gives_another_valid_order(self, rng):
        ch, T = random_system(rng, K=3)
        perm = [2, 0, 1]
        ch2 = apply_user_order(ch, perm)
        T2 = permute_users(T, perm)
        res = ds.mac_to_bc(ch2, T2, 1.0)
        assert np.all(np.tril(res.m_matrix.M, -1) == 0)
        for k in range(3):
            assert abs(res.bc_report.per_user_rate[k] - mac_rate_sic(ch2, covs(T2), k, 1.0)) < 1e-9
        # New user 0 is old user 2 and is now decoded last, i.e. interference-free.
        H, Q = ch.H[2], covs(T)[2]
        free = np.linalg.slogdet(np.eye(4) + H @ Q @ H.conj().T)[1] / np.log(2)
        assert np.isclose(res.mac_report.per_user_rate[0], free, rtol=1e-10)

    def test_parallel_flip_bit_identical(self, rng):
        ch, T = random_system(rng, K=4, N=6, r=[3, 3, 2, 2], L=[3, 2, 2, 1])
        serial = ds.mac_to_bc(ch, T, 1.0)
        with ThreadPoolExecutor(4) as pool:
            par = ds.flip_filters(serial.decorrelated, serial.scaling, executor=pool)
            full = ds.mac_to_bc(ch, T, 1.0, executor=pool)
        for a, b in zip(serial.filters.P + serial.filters.B, par.P + par.B):
            assert np.array_equal(a, b)
        for a, b in zip(serial.filters.P + serial.filters.B, full.filters.P + full.filters.B):
            assert np.array_equal(a, b)

    def test_custom_receivers_accepted(self, rng):
        ch, T = random_system(rng, K=2)
        G = ds.mmse_receivers_sic(ch, T, 1.0)
        G = [2.0 * g for g in G]
        res = ds.mac_to_bc(ch, T, 1.0, G=G)
        mac, bc = res.reports
        assert np.allclose(mac.per_user_rate, bc.per_user_rate, atol=1e-9)

    def test_scaling_solution_on_inactive_is_zero(self, rng):
        ch, T = random_system(rng)
        T[0][:, 0] = 0
        sol = ds.mac_to_bc(ch, T, 1.0).scaling
        assert isinstance(sol, ScalingSolution)
        assert np.all(sol.alpha_sq[~sol.active_mask] == 0)
