import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_unitary
from mimo_duality.exceptions import (
    DimensionError,
    NotHermitianError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from mimo_duality.numerics import (
    cholesky,
    hermitian_eig,
    reduced_svd,
    solve_block_upper_triangular,
    solve_lu,
)


def _rand_herm(rng, n):
    A = crandn(rng, n, n)
    return A + A.conj().T


class TestHermitianEig:
    def test_identity(self):
        e = hermitian_eig(np.eye(2))
        assert np.allclose(e.values, [1, 1])
        assert np.allclose(e.basis.conj().T @ e.basis, np.eye(2))

    def test_diagonal_sorted_descending(self):
        e = hermitian_eig(np.diag([1.0, 3.0]))
        assert np.allclose(e.values, [3, 1])
        assert np.allclose(e.basis, [[0, 1], [1, 0]])

    def test_reconstruction(self, rng):
        A = _rand_herm(rng, 4)
        e = hermitian_eig(A)
        err = np.linalg.norm(A - e.basis @ np.diag(e.values) @ e.basis.conj().T)
        assert err <= 1e-10 * np.linalg.norm(A)
        assert np.all(np.diff(e.values) <= 0)

    def test_phase_convention(self, rng):
        e = hermitian_eig(_rand_herm(rng, 5))
        for v in e.basis.T:
            lead = v[np.argmax(np.abs(v))]
            assert abs(lead.imag) < 1e-15 and lead.real > 0

    def test_deterministic(self, rng):
        A = _rand_herm(rng, 4)
        a, b = hermitian_eig(A), hermitian_eig(A.copy())
        assert np.array_equal(a.basis, b.basis) and np.array_equal(a.values, b.values)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            hermitian_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            hermitian_eig(np.ones((2, 3)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_spectrum_unitarily_invariant(self, seed, n):
        rng = np.random.default_rng(seed)
        A = _rand_herm(rng, n)
        U = random_unitary(rng, n)
        a = hermitian_eig(A).values
        b = hermitian_eig(U @ A @ U.conj().T, rtol=1e-9).values
        assert np.allclose(a, b, atol=1e-9 * max(1.0, np.max(np.abs(a))))


class TestCholesky:
    def test_scalar(self):
        assert np.allclose(cholesky(np.array([[4.0]])).L, [[2.0]])

    def test_identity(self):
        assert np.allclose(cholesky(np.eye(3)).L, np.eye(3))

    def test_reconstruction(self, rng):
        M = crandn(rng, 4, 4)
        A = M @ M.conj().T + np.eye(4)
        L = cholesky(A).L
        assert np.allclose(np.tril(L), L)
        assert np.all(np.diag(L).real > 0) and np.allclose(np.diag(L).imag, 0)
        assert np.linalg.norm(L @ L.conj().T - A) <= 1e-10 * np.linalg.norm(A)

    def test_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(np.diag([1.0, -1.0]))


class TestReducedSvd:
    def test_zero_matrix(self):
        s = reduced_svd(np.zeros((3, 2)))
        assert s.rank == 0 and s.U.shape == (3, 0) and s.V.shape == (2, 0)

    def test_unit_column(self):
        s = reduced_svd(np.array([[1.0], [0.0], [0.0]]))
        assert s.rank == 1 and np.allclose(s.D, [[1.0]])

    def test_constructed_rank(self, rng):
        A = crandn(rng, 4, 2) @ crandn(rng, 2, 3)
        s = reduced_svd(A)
        assert s.rank == 2
        assert np.allclose(s.U.conj().T @ s.U, np.eye(2))
        assert np.allclose(s.V.conj().T @ s.V, np.eye(2))
        assert np.allclose(s.U @ s.D @ s.V.conj().T, A)
        assert np.all(np.diff(np.diag(s.D)) <= 0)


class TestBlockBackSubstitution:
    def test_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(solve_block_upper_triangular(np.eye(3), v), v)

    def test_scalar(self):
        assert np.allclose(solve_block_upper_triangular(np.array([[2.0]]), [6.0]), [3.0])

    def test_random_upper_triangular(self, rng):
        M = np.triu(rng.standard_normal((6, 6)), 1) + np.diag(rng.uniform(1, 2, 6))
        rhs = rng.standard_normal(6)
        x = solve_block_upper_triangular(M, rhs)
        assert np.linalg.norm(M @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_blocks(self, rng):
        M = np.triu(rng.standard_normal((5, 5)), 1)
        M[0, 1] = M[2, 3] = M[2, 4] = M[3, 4] = 0.0
        M += np.diag(rng.uniform(1, 2, 5))
        rhs = rng.standard_normal(5)
        x = solve_block_upper_triangular(M, rhs, blocks=[2, 3])
        assert np.allclose(M @ x, rhs, rtol=1e-12)

    def test_non_diagonal_block_rejected(self):
        M = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(DimensionError):
            solve_block_upper_triangular(M, [1.0, 1.0], blocks=[2])

    def test_zero_pivot(self):
        with pytest.raises(SingularMatrixError):
            solve_block_upper_triangular(np.diag([1.0, 0.0]), [1.0, 1.0])

    def test_lower_part_rejected(self):
        with pytest.raises(DimensionError):
            solve_block_upper_triangular(np.array([[1.0, 0.0], [1.0, 1.0]]), [1.0, 1.0])


class TestLu:
    def test_identity(self):
        assert np.allclose(solve_lu(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])

    def test_diagonal(self):
        assert np.allclose(solve_lu(np.diag([2.0, 4.0]), [2.0, 4.0]), [1, 1])

    def test_diagonally_dominant(self, rng):
        M = -rng.uniform(0, 1, (8, 8))
        np.fill_diagonal(M, 0)
        np.fill_diagonal(M, -M.sum(axis=0) + 0.1)
        rhs = rng.uniform(0, 1, 8)
        x = solve_lu(M, rhs)
        assert np.linalg.norm(M @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)
        assert np.all(x >= 0)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            solve_lu(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 1.0])
