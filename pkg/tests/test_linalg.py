import numpy as np
import pytest
from hypothesis import given, strategies as st

from specgnn.errors import ConvergenceError, DimensionError, SymmetryError
from specgnn.linalg import (
    fix_signs,
    gft,
    inverse_gft,
    jacobi_eigh,
    operator_norm,
    shift_power_apply,
)

from conftest import random_symmetric


def check_decomposition(A, eig, recon=1e-8, ortho=1e-9):
    V, w = eig.eigenvectors, eig.eigenvalues
    assert np.max(np.abs(V.T @ V - np.eye(len(w)))) <= ortho
    assert np.max(np.abs((V * w) @ V.T - A)) <= recon
    assert np.all(np.diff(w) >= 0)


class TestJacobi:
    def test_identity(self):
        eig = jacobi_eigh(np.eye(3))
        np.testing.assert_array_equal(eig.eigenvalues, [1.0, 1.0, 1.0])
        check_decomposition(np.eye(3), eig)

    def test_swap_matrix(self):
        # characteristic polynomial lambda^2 - 1
        eig = jacobi_eigh([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(eig.eigenvalues, [-1.0, 1.0], atol=1e-15)
        r = 1 / np.sqrt(2)
        np.testing.assert_allclose(eig.eigenvectors, [[r, r], [-r, r]], atol=1e-15)

    def test_random_8x8(self):
        A = random_symmetric(8, 3)
        check_decomposition(A, jacobi_eigh(A))

    def test_matches_lapack_spectrum(self):
        A = random_symmetric(30, 11)
        np.testing.assert_allclose(
            jacobi_eigh(A).eigenvalues, np.linalg.eigvalsh(A), atol=1e-11
        )

    def test_diagonal_input_untouched(self):
        eig = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
        np.testing.assert_array_equal(eig.eigenvalues, [-1.0, 2.0, 3.0])
        np.testing.assert_array_equal(
            np.abs(eig.eigenvectors), [[0, 0, 1], [1, 0, 0], [0, 1, 0]]
        )

    def test_one_by_one(self):
        eig = jacobi_eigh([[-2.5]])
        assert eig.eigenvalues.tolist() == [-2.5]
        assert eig.eigenvectors.tolist() == [[1.0]]

    def test_sign_convention(self):
        eig = jacobi_eigh(random_symmetric(12, 5))
        V = eig.eigenvectors
        idx = np.argmax(np.abs(V), axis=0)
        assert np.all(V[idx, np.arange(12)] >= 0)

    def test_fix_signs_ties_use_first_entry(self):
        V = fix_signs(np.array([[-0.5], [0.5]]))
        assert V[0, 0] == 0.5 and V[1, 0] == -0.5

    def test_deterministic(self):
        A = random_symmetric(15, 2)
        a, b = jacobi_eigh(A), jacobi_eigh(A)
        np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
        np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)

    def test_repeated_eigenvalues(self):
        # complete graph K4: spectrum {-1, -1, -1, 3}
        A = np.ones((4, 4)) - np.eye(4)
        eig = jacobi_eigh(A)
        np.testing.assert_allclose(eig.eigenvalues, [-1, -1, -1, 3], atol=1e-14)
        check_decomposition(A, eig)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            jacobi_eigh(np.zeros((2, 3)))

    def test_empty(self):
        with pytest.raises(DimensionError):
            jacobi_eigh(np.zeros((0, 0)))

    def test_asymmetric(self):
        with pytest.raises(SymmetryError):
            jacobi_eigh([[0.0, 1.0], [1.0 + 1e-9, 0.0]])

    def test_tiny_asymmetry_accepted(self):
        jacobi_eigh([[0.0, 1.0], [1.0 + 1e-13, 0.0]])

    def test_sweep_cap(self):
        with pytest.raises(ConvergenceError) as info:
            jacobi_eigh(random_symmetric(10, 0), max_sweeps=1)
        assert info.value.residual > 0

    @given(st.integers(1, 25), st.integers(0, 2**31 - 1))
    def test_invariants_property(self, n, seed):
        A = random_symmetric(n, seed)
        eig = jacobi_eigh(A)
        check_decomposition(A, eig)
        assert abs(operator_norm(A) - np.max(np.abs(eig.eigenvalues))) <= 1e-8 * max(
            1.0, np.max(np.abs(eig.eigenvalues))
        )


class TestOperatorNorm:
    def test_diagonal(self):
        assert operator_norm(np.diag([1.0, -3.0, 2.0])) == pytest.approx(3.0, rel=1e-10)

    def test_swap(self):
        assert operator_norm([[0.0, 1.0], [1.0, 0.0]]) == pytest.approx(1.0, rel=1e-10)

    def test_homogeneity(self):
        A = random_symmetric(9, 4)
        assert operator_norm(2.5 * A) == pytest.approx(2.5 * operator_norm(A), rel=1e-9)

    def test_zero(self):
        assert operator_norm(np.zeros((4, 4))) == 0.0

    def test_nonsymmetric_matches_svd(self):
        A = np.random.default_rng(8).standard_normal((7, 7))
        assert operator_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-9)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            operator_norm(np.zeros((3, 2)))


class TestGFT:
    def test_identity_basis(self):
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(gft(np.eye(3), x), x)

    @given(st.integers(1, 15), st.integers(0, 2**31 - 1))
    def test_parseval_and_round_trip(self, n, seed):
        V = jacobi_eigh(random_symmetric(n, seed)).eigenvectors
        x = np.random.default_rng(seed + 1).standard_normal(n)
        xhat = gft(V, x)
        assert abs(np.linalg.norm(xhat) - np.linalg.norm(x)) <= 1e-10 * np.linalg.norm(x)
        assert np.linalg.norm(inverse_gft(V, xhat) - x) <= 1e-10 * np.linalg.norm(x)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            gft(np.eye(3), np.ones(4))
        with pytest.raises(DimensionError):
            inverse_gft(np.eye(3), np.ones(2))


class TestShiftPower:
    def test_k_zero(self, path3):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(shift_power_apply(path3, 0, x), x)

    def test_k_one(self, path3):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(shift_power_apply(path3, 1, x), path3 @ x)

    def test_path_graph_two_hops(self, path3):
        # e1 -> [0, 1, 0] -> [1, 0, 1]
        np.testing.assert_array_equal(shift_power_apply(path3, 2, [1.0, 0, 0]), [1, 0, 1])

    def test_trace(self, path3):
        out = shift_power_apply(path3, 2, [1.0, 0, 0], trace=True)
        assert [o.tolist() for o in out] == [[1, 0, 0], [0, 1, 0], [1, 0, 1]]

    def test_batch_axes(self, path3):
        X = np.arange(12.0).reshape(3, 2, 2)
        out = shift_power_apply(path3, 2, X)
        np.testing.assert_allclose(out, np.einsum("ij,jab->iab", path3 @ path3, X))

    @given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**31 - 1))
    def test_composition(self, j, k, seed):
        S = random_symmetric(8, seed)
        S /= np.max(np.abs(np.linalg.eigvalsh(S)))
        x = np.random.default_rng(seed).standard_normal(8)
        a = shift_power_apply(S, j + k, x)
        b = shift_power_apply(S, j, shift_power_apply(S, k, x))
        assert np.linalg.norm(a - b) <= 1e-9 * max(np.linalg.norm(a), 1e-300) + 1e-15

    def test_errors(self, path3):
        with pytest.raises(DimensionError):
            shift_power_apply(path3, -1, np.ones(3))
        with pytest.raises(DimensionError):
            shift_power_apply(path3, 1, np.ones(4))
