import numpy as np
import pytest
import scipy.sparse as sp

from gcad.errors import BoundsError, GraphValidationError, ParseError
from gcad.graph import (Graph, adjacency_from_edges, induced_subgraph,
                        load_graph, normalize_adjacency, save_graph,
                        undirected_edge_list, validate_graph)

from conftest import graph_from_edges, random_graph


def dense_normalized(adj_dense: np.ndarray) -> np.ndarray:
    """Brute-force D^{-1/2} (A + I) D^{-1/2} oracle."""
    a_bar = adj_dense + np.eye(adj_dense.shape[0])
    d_inv_sqrt = np.diag(1.0 / np.sqrt(a_bar.sum(axis=1)))
    return d_inv_sqrt @ a_bar @ d_inv_sqrt


def write_dataset(tmp_path, edge_text, features, label_text=None):
    edge_path = tmp_path / "edges.txt"
    edge_path.write_text(edge_text)
    feat_path = tmp_path / "features.csv"
    np.savetxt(feat_path, features, delimiter=",")
    label_path = None
    if label_text is not None:
        label_path = tmp_path / "labels.csv"
        label_path.write_text(label_text)
    return edge_path, feat_path, label_path


class TestLoadGraph:
    def test_reversed_pair_dedup(self, tmp_path):
        edge_path, feat_path, _ = write_dataset(tmp_path, "0 1\n1 0\n", np.eye(2))
        g = load_graph(edge_path, feat_path)
        assert g.n == 2 and g.num_edges == 1

    def test_edgeless(self, tmp_path):
        edge_path, feat_path, _ = write_dataset(tmp_path, "", np.ones((3, 1)))
        g = load_graph(edge_path, feat_path)
        assert g.n == 3 and g.num_edges == 0

    def test_self_loop_rejected(self, tmp_path):
        edge_path, feat_path, _ = write_dataset(tmp_path, "0 1\n2 2\n", np.eye(3))
        with pytest.raises(ParseError, match="edges.txt:2"):
            load_graph(edge_path, feat_path)

    def test_malformed_line_has_line_number(self, tmp_path):
        edge_path, feat_path, _ = write_dataset(tmp_path, "0 1\n1 x\n", np.eye(3))
        with pytest.raises(ParseError, match=":2"):
            load_graph(edge_path, feat_path)

    def test_out_of_range_index(self, tmp_path):
        edge_path, feat_path, _ = write_dataset(tmp_path, "0 9\n", np.eye(3))
        with pytest.raises(BoundsError):
            load_graph(edge_path, feat_path)

    def test_labels(self, tmp_path):
        edge_path, feat_path, label_path = write_dataset(
            tmp_path, "0 1\n", np.eye(4),
            "node,kind\n1,structural\n3,contextual\n")
        g = load_graph(edge_path, feat_path, label_path)
        assert g.labels is not None
        assert list(g.labels) == [0, 1, 0, 2]

    def test_bad_label_kind(self, tmp_path):
        edge_path, feat_path, label_path = write_dataset(
            tmp_path, "", np.eye(2), "node,kind\n0,bogus\n")
        with pytest.raises(ParseError):
            load_graph(edge_path, feat_path, label_path)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        g = random_graph(23, 0.2, 4, seed=9)
        labels = np.zeros(23, dtype=np.int8)
        labels[[2, 7]] = 1
        labels[[4]] = 2
        g = Graph(adjacency=g.adjacency, features=g.features, labels=labels)
        paths = (tmp_path / "e.txt", tmp_path / "f.csv", tmp_path / "l.csv")
        save_graph(g, *paths)
        g2 = load_graph(*paths)
        assert (g.adjacency != g2.adjacency).nnz == 0
        assert np.array_equal(g.features, g2.features)
        assert np.array_equal(g.labels, g2.labels)


class TestNormalize:
    def test_isolated_node(self):
        g = graph_from_edges(1, np.empty((0, 2)))
        assert normalize_adjacency(g).to_dense() == pytest.approx(np.array([[1.0]]))

    def test_single_edge(self):
        g = graph_from_edges(2, [(0, 1)])
        expected = np.full((2, 2), 0.5)
        assert normalize_adjacency(g).to_dense() == pytest.approx(expected)

    def test_star_graph(self):
        g = graph_from_edges(4, [(0, 1), (0, 2), (0, 3)])
        got = normalize_adjacency(g).to_dense()
        assert got[0, 0] == pytest.approx(0.25)
        for leaf in (1, 2, 3):
            assert got[leaf, leaf] == pytest.approx(0.5)
            assert got[0, leaf] == pytest.approx(1 / np.sqrt(8))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 51))
        g = random_graph(n, 0.15, 1, seed=seed)
        got = normalize_adjacency(g).to_dense()
        want = dense_normalized(g.adjacency.toarray())
        assert np.max(np.abs(got - want)) <= 1e-12
        assert np.max(np.abs(got - got.T)) == 0.0

    @pytest.mark.parametrize("make", ["cycle", "clique"])
    def test_row_sums_one_on_regular_graphs(self, make):
        n = 8
        if make == "cycle":
            edges = [(i, (i + 1) % n) for i in range(n)]
        else:
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
        g = graph_from_edges(n, edges)
        rows = normalize_adjacency(g).to_dense().sum(axis=1)
        assert rows == pytest.approx(np.ones(n))

    @pytest.mark.parametrize("seed", range(5))
    def test_spectral_radius_at_most_one(self, seed):
        g = random_graph(30, 0.2, 1, seed=seed + 100)
        a_hat = normalize_adjacency(g).to_dense()
        x = np.random.default_rng(seed).random(30)
        for _ in range(200):
            x = a_hat @ x
            x /= np.linalg.norm(x)
        radius = abs(x @ a_hat @ x)
        assert radius <= 1.0 + 1e-10


class TestInducedSubgraph:
    def test_single_node(self):
        g = random_graph(8, 0.3, 3, seed=1)
        local, block = induced_subgraph(g, [5])
        assert local.to_dense() == pytest.approx(np.array([[1.0]]))
        assert np.array_equal(block, g.features[[5]])

    def test_connected_pair(self):
        g = graph_from_edges(4, [(1, 2)])
        local, _ = induced_subgraph(g, [1, 2])
        assert local.to_dense() == pytest.approx(np.full((2, 2), 0.5))

    def test_pure_padding_is_identity(self):
        g = random_graph(10, 0.5, 2, seed=2)
        local, block = induced_subgraph(g, [3, 3, 3, 3])
        assert local.to_dense() == pytest.approx(np.eye(4))
        assert np.array_equal(block, np.tile(g.features[3], (4, 1)))

    def test_out_of_range(self):
        g = random_graph(5, 0.3, 1, seed=3)
        with pytest.raises(BoundsError):
            induced_subgraph(g, [0, 7])

    def test_matches_manual_construction(self):
        g = random_graph(20, 0.25, 2, seed=4)
        nodes = [7, 3, 11, 3]
        local, _ = induced_subgraph(g, nodes)
        dense = g.adjacency.toarray()
        manual = np.zeros((4, 4))
        for a in range(4):
            for b in range(4):
                if a != b:
                    manual[a, b] = dense[nodes[a], nodes[b]]
        from gcad.graph import normalize_dense_local
        assert local.to_dense() == pytest.approx(normalize_dense_local(manual))


class TestValidate:
    def test_report_counts(self):
        g = random_graph(12, 0.2, 3, seed=6)
        labels = np.zeros(12, dtype=np.int8)
        labels[[1, 2]] = 1
        labels[[3, 4]] = 2
        g = Graph(adjacency=g.adjacency, features=g.features, labels=labels)
        report = validate_graph(g)
        assert report.n == 12 and report.d == 3
        assert report.label_counts["structural"] == 2
        assert report.num_anomalies == 4

    def test_asymmetric_rejected(self):
        bad = sp.csr_matrix(np.array([[0, 1.0], [0, 0]]))
        g = Graph(adjacency=bad, features=np.eye(2))
        with pytest.raises(GraphValidationError, match="symmetric"):
            validate_graph(g)

    def test_self_loop_rejected(self):
        bad = sp.csr_matrix(np.array([[1.0, 1], [1, 0]]))
        g = Graph(adjacency=bad, features=np.eye(2))
        with pytest.raises(GraphValidationError, match="self-loops"):
            validate_graph(g)

    def test_non_binary_rejected(self):
        bad = sp.csr_matrix(np.array([[0, 2.0], [2.0, 0]]))
        g = Graph(adjacency=bad, features=np.eye(2))
        with pytest.raises(GraphValidationError, match="other than 1"):
            validate_graph(g)


def test_undirected_edge_list_round_trip():
    g = random_graph(15, 0.3, 1, seed=8)
    edges = undirected_edge_list(g.adjacency)
    rebuilt = adjacency_from_edges(15, edges)
    assert (rebuilt != g.adjacency).nnz == 0
