import numpy as np
import pytest

from bddbscan.core import NOISE, BlockPartition, ValidationError, apply_permutation, block_diagonal_score
from bddbscan.ordering import (
    PointKind,
    TraversalConfig,
    classify_points,
    cluster_ordering,
    dbscan,
    density_profile,
    neighborhood_graph,
    neighborhoods,
)

from oracles import block_graph, dbscan_components, density_sort, same_partition


def test_density_examples():
    W = np.full((5, 5), 0.7)
    np.fill_diagonal(W, 0)
    assert np.all(density_profile(W, 3) == 0.7)
    row = np.array([[0, 0.9, 0.5, 0.1], [0.9, 0, 0, 0], [0.5, 0, 0, 0], [0.1, 0, 0, 0]])
    assert density_profile(row, 2)[0] == 0.5
    rng = np.random.default_rng(0)
    R = rng.random((8, 8))
    R = (R + R.T) / 2
    np.fill_diagonal(R, 0)
    assert np.array_equal(density_profile(R, 3), density_sort(R, 3))


@pytest.mark.parametrize("delta", [0, 5])
def test_density_delta_range(delta):
    with pytest.raises(ValidationError):
        density_profile(np.zeros((5, 5)), delta)


def test_classify_examples():
    W = np.ones((5, 5))
    np.fill_diagonal(W, 0)
    assert np.all(classify_points(W, 0.5, 3) == PointKind.CORE)
    assert np.all(classify_points(np.zeros((5, 5)), 0.5, 3) == PointKind.NOISE)


def test_two_core_neighborhood_example():
    # point 0 has neighbors 1..3 (core with delta=3); 4 only touches 0 (border); 5 is far (noise)
    W = np.zeros((6, 6))
    for q in (1, 2, 3, 4):
        W[0, q] = W[q, 0] = 0.9
    W[1, 2] = W[2, 1] = 0.9
    W[5, 4] = W[4, 5] = 0.1
    kinds = classify_points(W, 0.5, 3)
    assert kinds[0] == PointKind.CORE
    assert kinds[4] == PointKind.BORDER
    assert kinds[5] == PointKind.NOISE


def test_neighborhoods_exclude_self_and_shrink_with_eps():
    rng = np.random.default_rng(1)
    W = rng.random((9, 9))
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0)
    prev_m, prev_core = None, None
    for eps in np.linspace(0, 1, 11):
        M, _ = neighborhoods(W, eps, 2)
        assert not M.diagonal().any()
        core = np.sum(classify_points(W, eps, 2) == PointKind.CORE)
        if prev_m is not None:
            assert np.all(M <= prev_m) and core <= prev_core
        prev_m, prev_core = M, core


def test_dbscan_examples():
    W = np.zeros((8, 8))
    W[:4, :4] = 1
    W[4:, 4:] = 1
    np.fill_diagonal(W, 0)
    labels = dbscan(W, 0.5, 3)
    assert same_partition(labels, [0] * 4 + [1] * 4)
    assert np.all(dbscan(np.zeros((6, 6)), 0.5, 2) == NOISE)


def test_dbscan_matches_component_oracle():
    rng = np.random.default_rng(2)
    W = rng.random((10, 10))
    W = (W + W.T) / 2
    np.fill_diagonal(W, 0)
    assert same_partition(dbscan(W, 0.4, 2), dbscan_components(W, 0.4, 2))


def test_border_tie_goes_to_lower_cluster():
    # two 4-cliques; point 8 touches one core of each with the same weight
    W = np.zeros((9, 9))
    W[:4, :4] = 1
    W[4:8, 4:8] = 1
    W[8, 0] = W[0, 8] = W[8, 4] = W[4, 8] = 0.6
    np.fill_diagonal(W, 0)
    labels = dbscan(W, 0.5, 3)
    assert labels[8] == labels[0] == 0


def test_dbscan_order_invariant_on_cores():
    rng = np.random.default_rng(3)
    W, _ = block_graph(rng, [5, 4, 6], cross=0.3)
    kinds = classify_points(W, 0.5, 3)
    core = kinds == PointKind.CORE
    perm = rng.permutation(W.shape[0])
    a = dbscan(W, 0.5, 3)
    b = dbscan(apply_permutation(W, perm), 0.5, 3)
    unperm = np.empty_like(b)
    unperm[perm] = b
    assert same_partition(a[core], unperm[core])


def test_core_reachability_is_equivalence():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = rng.integers(4, 11)
        W = rng.random((n, n))
        W = (W + W.T) / 2
        np.fill_diagonal(W, 0)
        eps, delta = rng.uniform(0.2, 0.8), int(rng.integers(1, n))
        M, _ = neighborhoods(W, eps, delta)
        core = classify_points(W, eps, delta) == PointKind.CORE
        idx = np.flatnonzero(core)
        # closure of direct reachability among cores
        R = M[np.ix_(idx, idx)] | np.eye(idx.size, dtype=bool)
        for _ in range(idx.size):
            R = R | ((R.astype(int) @ R.astype(int)) > 0)
        assert np.array_equal(R, R.T)
        assert np.array_equal(R, (R.astype(int) @ R.astype(int)) > 0)
        labels = dbscan(W, eps, delta)[idx]
        assert np.array_equal(R, labels[:, None] == labels[None, :])


def test_adaptive_thresholds():
    rng = np.random.default_rng(5)
    W, _ = block_graph(rng, [6, 6], cross=0.05)
    M, thr = neighborhoods(W, None, 3)
    assert np.allclose(thr, density_profile(W, 3))
    assert np.all(M.sum(axis=1) >= 3)


def test_ordering_block_example():
    W = np.zeros((5, 5))
    W[:3, :3] = 0.8
    W[3:, 3:] = 0.6
    np.fill_diagonal(W, 0)
    perm = np.array([3, 0, 4, 1, 2])
    Ws = apply_permutation(W, perm)
    o = cluster_ordering(Ws, TraversalConfig(delta=1))
    labels = (perm >= 3).astype(int)[o.permutation]
    assert np.count_nonzero(np.diff(labels)) == 1
    assert block_diagonal_score(apply_permutation(Ws, o.permutation), BlockPartition((int(np.argmax(np.diff(labels))) + 1,), 5)) == 1.0


def test_ordering_zero_graph_all_singletons():
    o = cluster_ordering(np.zeros((4, 4)), TraversalConfig(delta=1))
    assert sorted(o.permutation) == [0, 1, 2, 3]
    assert o.cluster_breaks == (0, 1, 2, 3)
    assert np.all(o.visit_similarity == 0)


def test_ordering_noisy_two_blocks():
    rng = np.random.default_rng(6)
    W, truth = block_graph(rng, [6, 6], low=0.5, high=1.0, cross=0.05)
    perm = rng.permutation(12)
    Ws, ts = apply_permutation(W, perm), truth[perm]
    o = cluster_ordering(Ws, TraversalConfig(delta=3))
    placed = ts[o.permutation]
    assert np.count_nonzero(np.diff(placed)) == 1
    bp = BlockPartition((6,), 12)
    assert block_diagonal_score(apply_permutation(Ws, o.permutation), bp) >= block_diagonal_score(Ws, bp)


def test_visit_similarity_is_max_to_previous_in_sweep():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(5, 15))
        W = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
        W = (W + W.T) / 2
        np.fill_diagonal(W, 0)
        o = cluster_ordering(W, TraversalConfig(delta=1))
        assert sorted(o.permutation) == list(range(n))
        assert o.cluster_breaks[0] == 0 and all(np.diff(o.cluster_breaks) > 0)
        for a, b in o.sweeps:
            assert o.visit_similarity[a] == 0
            for r in range(a + 1, b):
                prev = o.permutation[a:r]
                assert o.visit_similarity[r] == W[o.permutation[r], prev].max()


def test_noise_points_trail_as_singletons():
    W = np.zeros((7, 7))
    W[:5, :5] = 0.9
    np.fill_diagonal(W, 0)
    W[5, 6] = W[6, 5] = 0.05
    o = cluster_ordering(W, TraversalConfig(delta=3, epsilon=0.5))
    assert list(o.permutation[-2:]) == [5, 6]
    assert o.cluster_breaks[-2:] == (5, 6)


def test_neighborhood_graph_drops_noise_edges():
    W = np.zeros((6, 6))
    W[:4, :4] = 0.9
    W[0, 5] = W[5, 0] = 0.2
    np.fill_diagonal(W, 0)
    We = neighborhood_graph(W, TraversalConfig(delta=2, epsilon=0.5))
    assert np.all(We[5] == 0) and np.all(We[:4, :4] == W[:4, :4])


def test_config_validation():
    with pytest.raises(ValidationError):
        TraversalConfig(delta=0)
    with pytest.raises(ValidationError):
        TraversalConfig(epsilon=-1)
    with pytest.raises(ValidationError):
        cluster_ordering(np.zeros((4, 4)), TraversalConfig(delta=4))
