import numpy as np
import pytest

from gcad.errors import CapacityError, ConfigError
from gcad.graph import Graph, LABEL_CONTEXTUAL, LABEL_STRUCTURAL, validate_graph
from gcad.injection import (InjectionSpec, inject_benchmark, inject_contextual,
                            inject_structural)
from gcad.synthetic import make_synthetic_graph

from conftest import graph_from_edges


def test_single_pair_clique_on_edgeless_graph():
    g = graph_from_edges(5, np.empty((0, 2)))
    out = inject_structural(g, 1, 2, np.random.default_rng(0))
    assert out.num_edges == 1
    assert int(np.sum(out.labels == LABEL_STRUCTURAL)) == 2


def test_clique_over_complete_graph_adds_no_edges():
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    g = graph_from_edges(5, edges)
    out = inject_structural(g, 1, 5, np.random.default_rng(1))
    assert out.num_edges == g.num_edges
    assert int(np.sum(out.labels == LABEL_STRUCTURAL)) == 5


def test_structural_capacity_error():
    g = graph_from_edges(4, np.empty((0, 2)))
    with pytest.raises(CapacityError):
        inject_structural(g, 2, 3, np.random.default_rng(0))


def test_contextual_identical_features_keep_value():
    g = graph_from_edges(6, [(0, 1)], d=3)  # all-ones features
    out = inject_contextual(g, 2, 3, np.random.default_rng(2))
    assert np.array_equal(out.features, g.features)
    assert int(np.sum(out.labels == LABEL_CONTEXTUAL)) == 2


def test_contextual_k1_uses_the_single_candidate():
    rng_seed = 11
    g = make_synthetic_graph(n=40, d=8, communities=4, seed=3)
    out = inject_contextual(g, 5, 1, np.random.default_rng(rng_seed))
    # replay the draw protocol to recover each victim's candidate
    rng = np.random.default_rng(rng_seed)
    victims = rng.choice(np.arange(40), size=5, replace=False)
    for v in victims:
        cand = rng.choice(40, size=1, replace=False)[0]
        assert np.array_equal(out.features[v], g.features[cand])


def test_contextual_farthest_candidate_brute_force():
    g = make_synthetic_graph(n=80, d=12, communities=4, seed=4)
    seed = 21
    out = inject_contextual(g, 10, 7, np.random.default_rng(seed))
    rng = np.random.default_rng(seed)
    victims = rng.choice(np.arange(80), size=10, replace=False)
    for v in victims:
        candidates = rng.choice(80, size=7, replace=False)
        best, best_d = None, -1.0
        for c in candidates:
            dist = float(np.sqrt(np.sum((g.features[c] - g.features[v]) ** 2)))
            if dist > best_d:
                best, best_d = c, dist
        assert np.array_equal(out.features[v], g.features[best])
        assert out.labels[v] == LABEL_CONTEXTUAL


def test_benchmark_counts_and_disjointness():
    g = make_synthetic_graph(n=300, d=40, communities=6, seed=5)
    spec = InjectionSpec(clique_size=6, num_cliques=3, contextual_count=18,
                         candidate_pool=10, seed=9)
    out = inject_benchmark(g, spec)
    structural = set(np.flatnonzero(out.labels == LABEL_STRUCTURAL))
    contextual = set(np.flatnonzero(out.labels == LABEL_CONTEXTUAL))
    assert len(structural) == len(contextual) == 18
    assert not structural & contextual
    assert spec.total_anomalies == 36
    validate_graph(out)  # symmetry, no self-loops


def test_benchmark_deterministic():
    g = make_synthetic_graph(n=120, d=20, communities=4, seed=6)
    spec = InjectionSpec(clique_size=4, num_cliques=2, contextual_count=8,
                         candidate_pool=6, seed=13)
    a, b = inject_benchmark(g, spec), inject_benchmark(g, spec)
    assert (a.adjacency != b.adjacency).nnz == 0
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def test_benchmark_refuses_labeled_graph():
    g = make_synthetic_graph(n=60, d=10, communities=3, seed=7)
    spec = InjectionSpec(clique_size=3, num_cliques=2, contextual_count=6,
                         candidate_pool=5, seed=1)
    once = inject_benchmark(g, spec)
    with pytest.raises(ConfigError, match="already-labeled"):
        inject_benchmark(once, spec)


def test_spec_invariant_half_and_half():
    with pytest.raises(ConfigError, match="half-and-half"):
        InjectionSpec(clique_size=3, num_cliques=2, contextual_count=5,
                      candidate_pool=5)


def test_structural_edges_within_cliques_only():
    g = make_synthetic_graph(n=100, d=10, communities=4, seed=8)
    out = inject_structural(g, 2, 5, np.random.default_rng(3))
    added = (out.adjacency - g.adjacency).tocoo()
    anomalous = set(np.flatnonzero(out.labels == LABEL_STRUCTURAL))
    for u, v in zip(added.row, added.col):
        assert u in anomalous and v in anomalous
    # every clique is complete
    labels = np.flatnonzero(out.labels == LABEL_STRUCTURAL)
    dense = out.adjacency.toarray()
    # partition the 10 structural nodes back into the two planted cliques by
    # checking mutual completeness within at least one group of five
    complete_pairs = sum(dense[u, v] == 1.0
                         for i, u in enumerate(labels)
                         for v in labels[i + 1:])
    assert complete_pairs >= 2 * (5 * 4 // 2)
