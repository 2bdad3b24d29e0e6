import numpy as np
import pytest
import scipy.sparse as sp

from gcad.errors import ConfigError
from gcad.graph import induced_subgraph
from gcad.sampling import Instance, SubgraphSampler, build_instance, rwr_sample
from gcad.synthetic import make_synthetic_graph

from conftest import graph_from_edges, random_graph


def bfs_component(adj: sp.csr_matrix, start: int) -> set:
    seen, frontier = {start}, [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj.indices[adj.indptr[u]:adj.indptr[u + 1]]:
                if v not in seen:
                    seen.add(int(v))
                    nxt.append(int(v))
        frontier = nxt
    return seen


def test_isolated_target_pads_with_target():
    g = graph_from_edges(4, [(1, 2)])  # node 0 isolated
    nodes = rwr_sample(g, 0, 4, 0.5, np.random.default_rng(0))
    assert list(nodes) == [0, 0, 0, 0]


def test_restart_probability_one_never_leaves():
    g = graph_from_edges(5, [(0, 1), (1, 2)])
    nodes = rwr_sample(g, 0, 4, 1.0, np.random.default_rng(1))
    assert list(nodes) == [0, 0, 0, 0]


@pytest.mark.parametrize("seed", range(6))
def test_path_graph_reaches_the_single_neighbor(seed):
    g = graph_from_edges(3, [(0, 1), (1, 2)])
    nodes = rwr_sample(g, 0, 2, 0.5, np.random.default_rng(seed))
    assert list(nodes) == [0, 1]


@pytest.mark.parametrize("seed", range(5))
def test_reachability_property(seed):
    g = random_graph(40, 0.08, 2, seed=seed)
    target = int(np.random.default_rng(seed).integers(40))
    component = bfs_component(g.adjacency, target)
    nodes = rwr_sample(g, target, 6, 0.4, np.random.default_rng(seed + 50))
    assert nodes[0] == target
    assert set(nodes.tolist()) <= component


def test_determinism_and_seed_sensitivity():
    g = make_synthetic_graph(n=120, d=6, communities=3, seed=1)
    a = rwr_sample(g, 7, 4, 0.5, np.random.default_rng(42))
    b = rwr_sample(g, 7, 4, 0.5, np.random.default_rng(42))
    assert np.array_equal(a, b)
    draws = {tuple(rwr_sample(g, 7, 4, 0.5, np.random.default_rng(s)))
             for s in range(20)}
    assert len(draws) > 1


def test_invalid_parameters():
    g = graph_from_edges(3, [(0, 1)])
    with pytest.raises(ConfigError):
        rwr_sample(g, 0, 0, 0.5, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        rwr_sample(g, 0, 2, 0.0, np.random.default_rng(0))


def test_build_instance_masks_target_row():
    g = make_synthetic_graph(n=60, d=9, communities=3, seed=2)
    inst = build_instance(g, 11, 4, 0.5, np.random.default_rng(3))
    assert isinstance(inst, Instance)
    assert inst.nodes[0] == 11
    assert np.all(inst.features_masked[0] == 0.0)
    assert np.array_equal(inst.target_feature, g.features[11])
    for pos in range(1, 4):
        if inst.nodes[pos] != 11:
            assert np.array_equal(inst.features_masked[pos],
                                  g.features[inst.nodes[pos]])


def test_build_instance_deterministic():
    g = make_synthetic_graph(n=60, d=9, communities=3, seed=2)
    a = build_instance(g, 5, 4, 0.5, np.random.default_rng(9))
    b = build_instance(g, 5, 4, 0.5, np.random.default_rng(9))
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.features_masked, b.features_masked)


def test_single_node_instance():
    g = make_synthetic_graph(n=20, d=5, communities=2, seed=3)
    inst = build_instance(g, 4, 1, 0.5, np.random.default_rng(1))
    assert inst.local_adj.to_dense() == pytest.approx(np.array([[1.0]]))
    assert np.all(inst.features_masked == 0.0)


class TestSubgraphSampler:
    def test_target_column_and_padding(self):
        g = graph_from_edges(6, [(1, 2)])  # nodes 0,3,4,5 isolated
        sampler = SubgraphSampler(g, 4, 0.5)
        targets = np.array([0, 1, 5])
        nodes = sampler.sample_nodes(targets, np.random.default_rng(0))
        assert np.array_equal(nodes[:, 0], targets)
        assert list(nodes[0]) == [0, 0, 0, 0]
        assert list(nodes[2]) == [5, 5, 5, 5]
        assert set(nodes[1].tolist()) <= {1, 2}

    @pytest.mark.parametrize("seed", range(4))
    def test_reachability(self, seed):
        g = random_graph(50, 0.07, 2, seed=seed + 10)
        sampler = SubgraphSampler(g, 5, 0.5)
        targets = np.arange(50)
        nodes = sampler.sample_nodes(targets, np.random.default_rng(seed))
        for t in targets:
            component = bfs_component(g.adjacency, int(t))
            assert set(nodes[t].tolist()) <= component

    def test_local_adjacency_matches_induced_subgraph(self):
        g = make_synthetic_graph(n=80, d=4, communities=4, seed=4)
        sampler = SubgraphSampler(g, 4, 0.5)
        nodes = sampler.sample_nodes(np.arange(30), np.random.default_rng(7))
        locals_batch = sampler.local_adjacency(nodes)
        for b in range(30):
            reference, _ = induced_subgraph(g, nodes[b])
            assert locals_batch[b] == pytest.approx(reference.to_dense())

    def test_batch_determinism(self):
        g = make_synthetic_graph(n=90, d=4, communities=3, seed=5)
        sampler = SubgraphSampler(g, 4, 0.5)
        a = sampler.instances(np.arange(40), np.random.default_rng(11))
        b = sampler.instances(np.arange(40), np.random.default_rng(11))
        assert np.array_equal(a.nodes, b.nodes)
        assert np.array_equal(a.local_adj, b.local_adj)

    def test_distinct_nodes_within_instance(self):
        g = make_synthetic_graph(n=100, d=4, communities=4, seed=6)
        sampler = SubgraphSampler(g, 4, 0.5)
        nodes = sampler.sample_nodes(np.arange(100), np.random.default_rng(3))
        for row in nodes:
            non_target = [x for x in row[1:] if x != row[0]]
            assert len(non_target) == len(set(non_target))
