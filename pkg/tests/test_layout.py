import numpy as np
import pytest

from conftest import gaussian_blobs
from litmap.embedding import EmbeddingMatrix
from litmap.layout import (
    LayoutConfig,
    LayoutError,
    TsneConfig,
    attraction_kernel,
    build_alias_table,
    build_knn_graph,
    conditional_probabilities,
    fit_largevis,
    fit_tsne_exact,
    joint_probabilities,
    kl_divergence_and_gradient,
    largevis_objective,
    pairwise_distances,
)

# Frozen oracle for the (1,2,3)/perplexity-2 row: beta root-found with an
# independent scalar solver (scipy.optimize.brentq on 2^H(beta) - 2, xtol 1e-15).
ORACLE_P_ROW_123 = (0.7271772608269151, 0.23646217201215886, 0.03636056716092597)
ORACLE_SIGMA_123 = 1.1555317792578754


def blob_matrix(n_per=30, d=10, n_blobs=3, seed=0, spread=8.0):
    centers = np.zeros((n_blobs, d))
    for i in range(n_blobs):
        centers[i, i % d] = spread
    points, labels = gaussian_blobs(n_per, centers, scale=1.0, seed=seed)
    matrix = EmbeddingMatrix(
        row_ids=[str(1000 + i) for i in range(len(points))], values=points
    )
    return matrix, labels


def knn_purity(coords: np.ndarray, labels: np.ndarray, k: int = 10) -> float:
    d = pairwise_distances(coords)
    np.fill_diagonal(d, np.inf)
    idx = np.argsort(d, axis=1)[:, :k]
    return float((labels[idx] == labels[:, None]).mean())


class TestConditionalProbabilities:
    def test_frozen_root_finder_oracle(self):
        p_row, sigma = conditional_probabilities(np.array([1.0, 2.0, 3.0]), 2.0)
        np.testing.assert_allclose(p_row, ORACLE_P_ROW_123, atol=1e-4)
        assert sigma == pytest.approx(ORACLE_SIGMA_123, abs=1e-4)

    def test_rows_sum_to_one_and_hit_target_perplexity(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(5, 60))
            distances = rng.uniform(0.05, 4.0, size=n)
            target = float(rng.uniform(1.5, min(n - 1, 20)))
            p_row, _ = conditional_probabilities(distances, target)
            assert p_row.sum() == pytest.approx(1.0, abs=1e-6)
            entropy = -np.sum(p_row[p_row > 0] * np.log2(p_row[p_row > 0]))
            assert 2.0**entropy == pytest.approx(target, abs=1e-3)

    def test_identical_distances_uniform_row(self):
        p_row, sigma = conditional_probabilities(np.full(7, 2.5), 5.0)
        np.testing.assert_allclose(p_row, np.full(7, 1.0 / 7.0), atol=1e-12)
        assert sigma == np.inf

    def test_nonpositive_perplexity_rejected(self):
        with pytest.raises(LayoutError):
            conditional_probabilities(np.array([1.0, 2.0]), 0.0)


class TestKnnGraph:
    def test_neighbor_sets_match_brute_force(self):
        rng = np.random.default_rng(1)
        values = rng.normal(size=(100, 8))
        matrix = EmbeddingMatrix(row_ids=[f"{i:03d}" for i in range(100)], values=values)
        graph = build_knn_graph(matrix, k=10, perplexity=5.0)
        nbrs = graph.neighbor_sets()
        unit = values / np.linalg.norm(values, axis=1, keepdims=True)
        d = pairwise_distances(unit)
        np.fill_diagonal(d, np.inf)
        knn = [set(np.argsort(d[i])[:10]) for i in range(100)]
        for i in range(100):
            union = knn[i] | {j for j in range(100) if i in knn[j]}
            assert nbrs[i] == union  # symmetrized adjacency, no edges dropped

    def test_edges_are_merged_and_positive(self):
        matrix, _ = blob_matrix()
        graph = build_knn_graph(matrix, k=5, perplexity=3.0)
        seen = set()
        for i, j, w in graph.edges:
            assert i < j
            assert (i, j) not in seen
            seen.add((i, j))
            assert w > 0.0

    def test_k_must_leave_room(self):
        matrix, _ = blob_matrix(n_per=2, n_blobs=2)
        with pytest.raises(LayoutError):
            build_knn_graph(matrix, k=4, perplexity=2.0)


class TestAliasTable:
    def test_reconstructs_exact_distribution(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            w = rng.uniform(0.01, 5.0, size=int(rng.integers(1, 40)))
            q, alias = build_alias_table(w)
            k = len(w)
            mass = np.array(q, dtype=np.float64) / k
            for j in range(k):
                if q[j] < 1.0:
                    mass[alias[j]] += (1.0 - q[j]) / k
            np.testing.assert_allclose(mass, w / w.sum(), atol=1e-12)

    def test_uniform_weights_need_no_alias(self):
        q, _ = build_alias_table(np.ones(6))
        np.testing.assert_allclose(q, 1.0)


class TestLargeVis:
    def test_deterministic_across_runs(self):
        matrix, _ = blob_matrix(n_per=20, n_blobs=3)
        graph = build_knn_graph(matrix, k=5, perplexity=3.0)
        a = fit_largevis(graph, seed=9, config=LayoutConfig(n_updates=30000))
        b = fit_largevis(graph, seed=9, config=LayoutConfig(n_updates=30000))
        assert a.coordinates.tobytes() == b.coordinates.tobytes()

    def test_seed_changes_layout(self):
        matrix, _ = blob_matrix(n_per=15, n_blobs=2)
        graph = build_knn_graph(matrix, k=5, perplexity=3.0)
        a = fit_largevis(graph, seed=1, config=LayoutConfig(n_updates=5000))
        b = fit_largevis(graph, seed=2, config=LayoutConfig(n_updates=5000))
        assert a.coordinates.tobytes() != b.coordinates.tobytes()

    def test_separates_blobs(self):
        matrix, labels = blob_matrix(n_per=40, d=12, n_blobs=3, spread=10.0)
        graph = build_knn_graph(matrix, k=10, perplexity=5.0)
        layout = fit_largevis(graph, seed=3)
        assert knn_purity(layout.coordinates, labels) >= 0.8

    def test_objective_improves_over_random_init(self):
        # the layout objective is a log-likelihood: higher is better
        matrix, _ = blob_matrix(n_per=30, n_blobs=3)
        graph = build_knn_graph(matrix, k=8, perplexity=4.0)
        layout = fit_largevis(graph, seed=5)
        rng = np.random.default_rng(5)
        random_coords = rng.uniform(-1, 1, size=(graph.n, 2))
        assert layout.final_objective > largevis_objective(graph, random_coords, gamma=7.0)

    def test_coordinates_finite_and_shaped(self):
        matrix, _ = blob_matrix(n_per=10, n_blobs=2)
        graph = build_knn_graph(matrix, k=4, perplexity=2.5)
        layout = fit_largevis(graph, seed=0, config=LayoutConfig(n_updates=2000))
        assert layout.coordinates.shape == (graph.n, 2)
        assert np.isfinite(layout.coordinates).all()
        assert layout.method == "largevis"


class TestTsne:
    def test_joint_probabilities_symmetric_normalized(self):
        matrix, _ = blob_matrix(n_per=15, n_blobs=2)
        P = joint_probabilities(matrix, perplexity=5.0)
        assert P.sum() == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(P, P.T, atol=1e-15)
        assert (P >= 0).all()
        assert np.diagonal(P).max() == 0.0

    def test_kl_gradient_matches_central_differences(self):
        rng = np.random.default_rng(4)
        matrix = EmbeddingMatrix(
            row_ids=[str(i) for i in range(30)], values=rng.normal(size=(30, 6))
        )
        P = joint_probabilities(matrix, perplexity=8.0)
        Y = rng.normal(scale=0.5, size=(30, 2))
        _, grad = kl_divergence_and_gradient(P, Y)
        h = 1e-5
        fd = np.zeros_like(grad)
        for i in range(30):
            for c in range(2):
                Yp, Ym = Y.copy(), Y.copy()
                Yp[i, c] += h
                Ym[i, c] -= h
                fd[i, c] = (
                    kl_divergence_and_gradient(P, Yp)[0]
                    - kl_divergence_and_gradient(P, Ym)[0]
                ) / (2 * h)
        rel = np.linalg.norm(grad - fd) / np.linalg.norm(fd)
        assert rel < 1e-4

    def test_deterministic_across_runs(self):
        matrix, _ = blob_matrix(n_per=15, n_blobs=2)
        cfg = TsneConfig(iters=300)
        a = fit_tsne_exact(matrix, perplexity=5.0, seed=7, config=cfg)
        b = fit_tsne_exact(matrix, perplexity=5.0, seed=7, config=cfg)
        assert a.coordinates.tobytes() == b.coordinates.tobytes()

    def test_objective_history_recorded_after_exaggeration(self):
        matrix, _ = blob_matrix(n_per=15, n_blobs=2)
        layout = fit_tsne_exact(
            matrix, perplexity=5.0, seed=0, config=TsneConfig(iters=400, kl_check_every=50)
        )
        iters = [it for it, _ in layout.objective_history]
        assert iters and all(it >= 250 for it in iters)
        assert layout.final_objective == pytest.approx(layout.objective_history[-1][1])

    def test_kl_history_trends_down(self):
        matrix, _ = blob_matrix(n_per=20, n_blobs=2, spread=10.0)
        layout = fit_tsne_exact(matrix, perplexity=6.0, seed=1, config=TsneConfig(iters=600))
        values = [kl for _, kl in layout.objective_history]
        assert values[-1] <= values[0] + 1e-9

    def test_size_cap_enforced(self):
        rng = np.random.default_rng(0)
        matrix = EmbeddingMatrix(
            row_ids=[str(i) for i in range(12)], values=rng.normal(size=(12, 3))
        )
        with pytest.raises(LayoutError):
            fit_tsne_exact(matrix, perplexity=3.0, seed=0, config=TsneConfig(exact_cap=10))

    def test_perplexity_must_be_below_n_minus_one(self):
        rng = np.random.default_rng(0)
        matrix = EmbeddingMatrix(
            row_ids=[str(i) for i in range(10)], values=rng.normal(size=(10, 3))
        )
        with pytest.raises(LayoutError):
            fit_tsne_exact(matrix, perplexity=9.5, seed=0)

    def test_separates_blobs(self):
        matrix, labels = blob_matrix(n_per=30, d=12, n_blobs=3, spread=10.0)
        layout = fit_tsne_exact(matrix, perplexity=10.0, seed=2, config=TsneConfig(iters=500))
        assert knn_purity(layout.coordinates, labels) >= 0.8


def test_attraction_kernel_shape():
    assert attraction_kernel(0.0) == 1.0
    assert attraction_kernel(1.0) == 0.5
    assert attraction_kernel(3.0) == pytest.approx(0.1)
