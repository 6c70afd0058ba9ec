import numpy as np
import pytest
from hypothesis import given, strategies as st

from specgnn.errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    GenerationError,
    InvalidPermutationError,
)
from specgnn.graph import (
    Graph,
    PermutationMap,
    knn_sparsify,
    load_graph,
    normalize_shift,
    permute_graph,
    permute_signal,
    perturb,
    save_graph,
    sbm_generate,
)
from specgnn.linalg import jacobi_eigh, operator_norm


def complete(n):
    return np.ones((n, n)) - np.eye(n)


class TestSBM:
    def test_block_structure_and_density(self):
        g = sbm_generate(50, 5, 0.8, 0.2, seed=0)
        assert g.n == 50
        np.testing.assert_array_equal(np.bincount(g.communities), [10] * 5)
        A = g.shift
        assert np.all(np.diag(A) == 0) and np.array_equal(A, A.T)
        assert set(np.unique(A)) <= {0.0, 1.0}
        same = g.communities[:, None] == g.communities[None, :]
        off = ~np.eye(50, dtype=bool)
        intra = A[same & off].mean()
        inter = A[~same].mean()
        assert abs(intra - 0.8) <= 0.1
        assert abs(inter - 0.2) <= 0.1

    def test_forced_complete_graph(self):
        g = sbm_generate(10, 2, 1.0, 1.0, seed=3)
        np.testing.assert_array_equal(g.shift, complete(10))

    def test_disjoint_cliques_rejected(self):
        with pytest.raises(GenerationError):
            sbm_generate(10, 2, 1.0, 0.0, seed=0)

    def test_bad_community_count(self):
        with pytest.raises(ConfigError):
            sbm_generate(10, 3, 0.5, 0.5)

    def test_bad_probability(self):
        with pytest.raises(ConfigError):
            sbm_generate(10, 2, 1.5, 0.5)

    @given(st.integers(0, 10_000))
    def test_seed_determinism(self, seed):
        a = sbm_generate(20, 4, 0.7, 0.2, seed=seed)
        b = sbm_generate(20, 4, 0.7, 0.2, seed=seed)
        assert a.shift.tobytes() == b.shift.tobytes()


class TestNormalize:
    def test_complete_graph(self):
        g = normalize_shift(complete(5))
        np.testing.assert_allclose(g.shift, complete(5) / 4, rtol=1e-10)
        assert g.kind == "normalized-adjacency"
        assert jacobi_eigh(g.shift).eigenvalues[-1] == pytest.approx(1.0, abs=1e-8)

    def test_scale_invariance(self):
        A = sbm_generate(20, 2, 0.6, 0.3, seed=1).shift
        np.testing.assert_allclose(normalize_shift(3 * A).shift, normalize_shift(A).shift, rtol=1e-9)

    def test_path_graph(self, path3):
        # path eigenvalues are -sqrt2, 0, sqrt2
        lam = jacobi_eigh(path3).eigenvalues
        np.testing.assert_allclose(lam, [-np.sqrt(2), 0, np.sqrt(2)], atol=1e-14)
        np.testing.assert_allclose(normalize_shift(path3).shift, path3 / np.sqrt(2), rtol=1e-10)

    def test_keeps_metadata(self):
        g = normalize_shift(sbm_generate(20, 4, 0.9, 0.1, seed=2))
        assert g.communities is not None and g.kind == "normalized-adjacency"

    def test_zero_matrix(self):
        with pytest.raises(DegenerateInputError):
            normalize_shift(np.zeros((3, 3)))

    def test_negative_entries(self):
        with pytest.raises(DegenerateInputError):
            normalize_shift(-complete(3))

    @given(st.integers(0, 10_000))
    def test_spectrum_in_unit_interval(self, seed):
        g = normalize_shift(sbm_generate(15, 3, 0.8, 0.3, seed=seed))
        lam = jacobi_eigh(g.shift).eigenvalues
        assert max(abs(lam[0]), abs(lam[-1])) == pytest.approx(1.0, abs=1e-8)


class TestPerturb:
    S = normalize_shift(sbm_generate(20, 4, 0.8, 0.2, seed=5)).shift

    def test_zero_eps_bit_exact(self):
        out = perturb(self.S, 0.0, seed=1)
        assert out.tobytes() == self.S.tobytes() and out is not self.S

    @given(st.floats(1e-6, 1.0), st.integers(0, 2**31 - 1), st.sampled_from(["dense", "edges-only"]))
    def test_norm_exact_and_symmetric(self, eps, seed, mode):
        St = perturb(self.S, eps, mode=mode, seed=seed)
        E = St - self.S
        assert abs(np.linalg.norm(E, 2) - eps) <= 1e-6 * eps
        assert abs(operator_norm(E) - eps) <= 1e-6 * eps
        assert np.max(np.abs(St - St.T)) == 0.0

    def test_edges_only_support(self):
        St = perturb(self.S, 0.1, mode="edges-only", seed=2)
        outside = (self.S == 0) & ~np.eye(20, dtype=bool)
        assert np.all((St - self.S)[outside] == 0)

    def test_same_seed_same_operator(self):
        assert perturb(self.S, 0.01, seed=9).tobytes() == perturb(self.S, 0.01, seed=9).tobytes()

    def test_negative_eps(self):
        with pytest.raises(ConfigError):
            perturb(self.S, -0.1)

    def test_edges_only_on_edgeless(self):
        with pytest.raises(DegenerateInputError):
            perturb(np.eye(3), 0.1, mode="edges-only")

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            perturb(self.S, 0.1, mode="sparse")


class TestPermutation:
    def test_identity(self, path3):
        P = PermutationMap(np.arange(3))
        np.testing.assert_array_equal(permute_graph(path3, P), path3)
        np.testing.assert_array_equal(permute_signal([1, 2, 3], P), [1, 2, 3])

    def test_path_relabel(self):
        # weighted path 0 -(1)- 1 -(2)- 2; swapping the ends reverses it
        A = np.array([[0.0, 1, 0], [1, 0, 2], [0, 2, 0]])
        B = permute_graph(A, PermutationMap([2, 1, 0]))
        np.testing.assert_array_equal(B, [[0, 2, 0], [2, 0, 1], [0, 1, 0]])

    def test_matches_matrix_form(self):
        rng = np.random.default_rng(0)
        P = PermutationMap.random(6, seed=1)
        S = rng.standard_normal((6, 6))
        x = rng.standard_normal(6)
        M = P.matrix()
        np.testing.assert_array_equal(permute_graph(S, P), M.T @ S @ M)
        np.testing.assert_array_equal(permute_signal(x, P), M.T @ x)
        np.testing.assert_array_equal(M.sum(axis=0), 1)
        np.testing.assert_array_equal(M.sum(axis=1), 1)

    @given(st.integers(2, 20), st.integers(0, 2**31 - 1))
    def test_inverse_and_spectrum(self, n, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((n, n))
        S = M + M.T
        P = PermutationMap.random(n, seed=seed)
        T = permute_graph(S, P)
        np.testing.assert_array_equal(permute_graph(T, P.inverse()), S)
        np.testing.assert_allclose(
            jacobi_eigh(T).eigenvalues, jacobi_eigh(S).eigenvalues, atol=1e-9
        )

    def test_not_a_bijection(self):
        with pytest.raises(InvalidPermutationError):
            PermutationMap([0, 0, 2])

    def test_size_mismatch(self, path3):
        with pytest.raises(ConfigError):
            permute_graph(path3, PermutationMap([1, 0]))


class TestKNN:
    W = np.array(
        [
            [0.0, 0.9, 0.5, 0.1],
            [0.9, 0.0, 0.2, 0.3],
            [0.5, 0.2, 0.0, 0.8],
            [0.1, 0.3, 0.8, 0.0],
        ]
    )

    def test_hand_built_top2(self):
        # top-2 lists: 0 -> {1, 2}, 1 -> {0, 3}, 2 -> {3, 0}, 3 -> {2, 1}
        # union edges: 01, 02, 13, 23; edge 03 and 12 dropped
        g = knn_sparsify(self.W, 2)
        edges = {(i, j) for i, j in zip(*np.nonzero(np.triu(g.shift)))}
        assert edges == {(0, 1), (0, 2), (1, 3), (2, 3)}
        A = np.where(g.shift > 0, self.W, 0)
        np.testing.assert_allclose(g.shift, A / np.linalg.norm(A, 2), rtol=1e-10)

    def test_ties_prefer_lower_index(self):
        W = complete(4)
        g = knn_sparsify(W, 1)
        # every node picks its lowest-index neighbour: 0->1, 1->0, 2->0, 3->0
        edges = {(i, j) for i, j in zip(*np.nonzero(np.triu(g.shift)))}
        assert edges == {(0, 1), (0, 2), (0, 3)}

    def test_full_k_keeps_positive_edges(self):
        W = self.W.copy()
        W[0, 3] = W[3, 0] = 0.0
        g = knn_sparsify(W, 3)
        np.testing.assert_array_equal(g.shift > 0, W > 0)

    @given(st.integers(5, 15), st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_min_degree(self, n, k, seed):
        rng = np.random.default_rng(seed)
        M = rng.random((n, n))
        W = (M + M.T) / 2
        np.fill_diagonal(W, 0)
        g = knn_sparsify(W, k)
        assert g.degrees().min() >= k
        assert np.max(np.abs(g.shift - g.shift.T)) <= 1e-12

    def test_k_too_large(self):
        with pytest.raises(ConfigError):
            knn_sparsify(self.W, 4)


class TestGraphIO:
    def test_round_trip(self, tmp_path):
        g = normalize_shift(sbm_generate(12, 3, 0.7, 0.3, seed=4))
        save_graph(g, tmp_path / "g.txt")
        h = load_graph(tmp_path / "g.txt")
        assert h.kind == g.kind
        assert h.shift.tobytes() == g.shift.tobytes()
        assert (tmp_path / "g.txt").read_text().startswith("12 normalized-adjacency\n")

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            load_graph(tmp_path / "nope.txt")

    def test_malformed(self, tmp_path):
        (tmp_path / "bad.txt").write_text("3 raw-adjacency\n0 1\n")
        with pytest.raises(DataError):
            load_graph(tmp_path / "bad.txt")

    def test_graph_kind_checked(self):
        with pytest.raises(ConfigError):
            Graph(np.eye(2), "laplacian")
