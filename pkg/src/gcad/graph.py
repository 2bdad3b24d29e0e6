"""Attributed-graph container, dataset file I/O and adjacency normalization.

The on-disk formats are deliberately plain: an edge list ("u v" per line,
0-indexed, each undirected edge once), a headerless CSV feature matrix and an
optional "node,kind" label CSV listing only anomalous nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BoundsError, GraphValidationError, ParseError

LABEL_NORMAL = 0
LABEL_STRUCTURAL = 1
LABEL_CONTEXTUAL = 2

KIND_TO_LABEL = {"normal": LABEL_NORMAL,
                 "structural": LABEL_STRUCTURAL,
                 "contextual": LABEL_CONTEXTUAL}
LABEL_TO_KIND = {v: k for k, v in KIND_TO_LABEL.items()}


@dataclass(frozen=True)
class Graph:
    """Undirected attributed graph.

    adjacency : scipy CSR, symmetric 0/1, empty diagonal
    features  : (n, d) float64
    labels    : optional (n,) int8 with LABEL_* values; None = unlabeled graph
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each edge counted once)."""
        return int(self.adjacency.nnz // 2)

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def anomaly_mask(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(self.n, dtype=bool)
        return self.labels != LABEL_NORMAL


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency D^{-1/2} (A + I) D^{-1/2}."""

    n: int
    values: sp.csr_matrix = field(repr=False)

    def to_dense(self) -> np.ndarray:
        return self.values.toarray()


@dataclass(frozen=True)
class GraphReport:
    n: int
    d: int
    num_edges: int
    isolated_nodes: int
    label_counts: dict

    @property
    def num_anomalies(self) -> int:
        return sum(v for k, v in self.label_counts.items() if k != "normal")


def adjacency_from_edges(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """Build a symmetric 0/1 CSR matrix from an (e, 2) array of undirected edges."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size == 0:
        return sp.csr_matrix((n, n), dtype=np.float64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.float64)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    adj.data[:] = 1.0  # collapse duplicates from the COO sum
    adj.sort_indices()
    return adj


def undirected_edge_list(adjacency: sp.spmatrix) -> np.ndarray:
    """Return the (e, 2) array of undirected edges with u < v, sorted."""
    coo = sp.triu(adjacency, k=1).tocoo()
    edges = np.column_stack([coo.row, coo.col]).astype(np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def load_graph(edge_path, feature_path, label_path=None) -> Graph:
    """Load a graph from an edge list, a feature CSV and an optional label CSV.

    Duplicate and reversed edge lines are deduplicated; self-loop lines and
    out-of-range indices are rejected.
    """
    features = np.loadtxt(feature_path, delimiter=",", dtype=np.float64, ndmin=2)
    n = features.shape[0]

    edges = []
    with open(edge_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError(edge_path, line_no,
                                 f"expected 'u v', got {line.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(edge_path, line_no,
                                 f"non-integer node id in {line.strip()!r}") from None
            if u < 0 or v < 0 or u >= n or v >= n:
                raise BoundsError(
                    f"{edge_path}:{line_no}: node id out of range [0, {n})")
            if u == v:
                raise ParseError(edge_path, line_no, f"self-loop on node {u}")
            edges.append((min(u, v), max(u, v)))
    edge_arr = np.array(sorted(set(edges)), dtype=np.int64).reshape(-1, 2)
    adjacency = adjacency_from_edges(n, edge_arr)

    labels = None
    if label_path is not None:
        labels = np.zeros(n, dtype=np.int8)
        with open(label_path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line_no == 1 and line.lower() == "node,kind":
                    continue
                parts = line.split(",")
                if len(parts) != 2 or parts[1].strip() not in KIND_TO_LABEL:
                    raise ParseError(label_path, line_no,
                                     f"expected 'node,kind', got {line!r}")
                try:
                    node = int(parts[0])
                except ValueError:
                    raise ParseError(label_path, line_no,
                                     f"non-integer node id {parts[0]!r}") from None
                if node < 0 or node >= n:
                    raise BoundsError(
                        f"{label_path}:{line_no}: node id {node} out of range [0, {n})")
                labels[node] = KIND_TO_LABEL[parts[1].strip()]

    return Graph(adjacency=adjacency, features=features, labels=labels)


def save_graph(g: Graph, edge_path, feature_path, label_path=None) -> None:
    """Write a graph back to the load_graph file formats (round-trip identity)."""
    edges = undirected_edge_list(g.adjacency)
    with open(edge_path, "w", encoding="utf-8") as fh:
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    np.savetxt(feature_path, g.features, delimiter=",", fmt="%.17g")
    if label_path is not None:
        with open(label_path, "w", encoding="utf-8") as fh:
            fh.write("node,kind\n")
            if g.labels is not None:
                for node in np.flatnonzero(g.labels != LABEL_NORMAL):
                    fh.write(f"{node},{LABEL_TO_KIND[int(g.labels[node])]}\n")


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    """D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I."""
    values = _normalize(g.adjacency)
    return NormalizedAdjacency(n=g.n, values=values)


def _normalize(adjacency: sp.spmatrix) -> sp.csr_matrix:
    n = adjacency.shape[0]
    a_bar = (adjacency + sp.eye(n, format="csr")).tocsr()
    deg = np.asarray(a_bar.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)  # deg >= 1 thanks to the self-loop
    scale = sp.diags(inv_sqrt)
    return (scale @ a_bar @ scale).tocsr()


def normalize_dense_local(local: np.ndarray) -> np.ndarray:
    """Dense variant of the same normalization for small per-instance blocks."""
    m = local.shape[0]
    a_bar = local + np.eye(m)
    inv_sqrt = 1.0 / np.sqrt(a_bar.sum(axis=1))
    return a_bar * inv_sqrt[:, None] * inv_sqrt[None, :]


def induced_subgraph(g: Graph, nodes) -> tuple[NormalizedAdjacency, np.ndarray]:
    """Normalized local adjacency and feature block for an ordered node list.

    Repeated entries are distinct positions with no mutual edges, so a pure
    padding list normalizes to the identity.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if nodes.size == 0:
        raise BoundsError("node list must be non-empty")
    if nodes.min() < 0 or nodes.max() >= g.n:
        raise BoundsError(f"node id out of range [0, {g.n})")
    # repeated nodes land as distinct positions; positions backed by the same
    # underlying node get no mutual edge because A stores no self-loops
    local = g.adjacency[nodes][:, nodes].toarray()
    normalized = sp.csr_matrix(normalize_dense_local(local))
    return (NormalizedAdjacency(n=nodes.size, values=normalized),
            g.features[nodes].copy())


def validate_graph(g: Graph) -> GraphReport:
    """Check every Graph invariant and summarize counts; raise on violation."""
    violations = []
    adj = g.adjacency
    if adj.shape[0] != adj.shape[1]:
        violations.append(f"adjacency not square: {adj.shape}")
    elif adj.shape[0] != g.n:
        violations.append(f"adjacency size {adj.shape[0]} != feature rows {g.n}")
    if adj.nnz and not np.all(adj.data == 1.0):
        violations.append("adjacency has entries other than 1")
    if adj.diagonal().sum() != 0:
        violations.append("adjacency stores self-loops")
    if (adj != adj.T).nnz != 0:
        violations.append("adjacency is not symmetric")
    if g.labels is not None:
        if g.labels.shape != (g.n,):
            violations.append(f"label array shape {g.labels.shape} != ({g.n},)")
        elif not np.isin(g.labels, list(LABEL_TO_KIND)).all():
            violations.append("label array contains unknown kinds")
    if not np.isfinite(g.features).all():
        violations.append("features contain non-finite values")
    if violations:
        raise GraphValidationError(violations)

    counts = {}
    if g.labels is not None:
        for value, kind in LABEL_TO_KIND.items():
            counts[kind] = int(np.sum(g.labels == value))
    return GraphReport(n=g.n, d=g.d, num_edges=g.num_edges,
                       isolated_nodes=int(np.sum(g.degrees() == 0)),
                       label_counts=counts)
