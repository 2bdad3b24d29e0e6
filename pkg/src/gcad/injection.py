"""Benchmark anomaly injection: planted cliques and swapped-attribute nodes.

The protocol follows the citation-network convention: q disjoint cliques of
size m_c (structural anomalies) plus an equal number of contextual anomalies
whose feature row is replaced by the most distant of k random candidates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError
from .graph import (Graph, LABEL_CONTEXTUAL, LABEL_NORMAL, LABEL_STRUCTURAL,
                    adjacency_from_edges, undirected_edge_list)


@dataclass(frozen=True)
class InjectionSpec:
    clique_size: int = 15
    num_cliques: int = 5
    contextual_count: int = 75
    candidate_pool: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.clique_size < 2 or self.num_cliques < 1:
            raise ConfigError("need clique_size >= 2 and num_cliques >= 1")
        if self.candidate_pool < 1:
            raise ConfigError("candidate_pool must be >= 1")
        if self.num_cliques * self.clique_size != self.contextual_count:
            raise ConfigError(
                "half-and-half split requires num_cliques * clique_size == "
                f"contextual_count, got {self.num_cliques}*{self.clique_size} "
                f"!= {self.contextual_count}")

    @property
    def total_anomalies(self) -> int:
        return 2 * self.num_cliques * self.clique_size


def _unlabeled_nodes(labels: np.ndarray) -> np.ndarray:
    return np.flatnonzero(labels == LABEL_NORMAL)


def inject_structural(g: Graph, num_cliques: int, clique_size: int,
                      rng: np.random.Generator) -> Graph:
    """Plant num_cliques disjoint cliques of clique_size unlabeled nodes."""
    labels = (g.labels.copy() if g.labels is not None
              else np.zeros(g.n, dtype=np.int8))
    pool = _unlabeled_nodes(labels)
    need = num_cliques * clique_size
    if pool.size < need:
        raise CapacityError(
            f"need {need} unlabeled nodes for cliques, have {pool.size}")
    chosen = rng.choice(pool, size=need, replace=False)

    new_edges = []
    for c in range(num_cliques):
        members = chosen[c * clique_size:(c + 1) * clique_size]
        labels[members] = LABEL_STRUCTURAL
        for i in range(clique_size):
            for j in range(i + 1, clique_size):
                new_edges.append((members[i], members[j]))

    edges = undirected_edge_list(g.adjacency)
    combined = {(min(u, v), max(u, v)) for u, v in edges}
    combined.update((min(u, v), max(u, v)) for u, v in new_edges)
    adjacency = adjacency_from_edges(g.n, np.array(sorted(combined)))
    return Graph(adjacency=adjacency, features=g.features.copy(), labels=labels)


def inject_contextual(g: Graph, count: int, candidate_pool: int,
                      rng: np.random.Generator) -> Graph:
    """Swap count unlabeled nodes' features with their farthest candidate row."""
    labels = (g.labels.copy() if g.labels is not None
              else np.zeros(g.n, dtype=np.int8))
    pool = _unlabeled_nodes(labels)
    if pool.size < count:
        raise CapacityError(
            f"need {count} unlabeled nodes for contextual anomalies, "
            f"have {pool.size}")
    if candidate_pool > g.n:
        raise CapacityError(
            f"candidate pool {candidate_pool} exceeds node count {g.n}")
    victims = rng.choice(pool, size=count, replace=False)

    features = g.features.copy()
    for v in victims:
        candidates = rng.choice(g.n, size=candidate_pool, replace=False)
        dists = np.linalg.norm(g.features[candidates] - g.features[v], axis=1)
        features[v] = g.features[candidates[np.argmax(dists)]]
        labels[v] = LABEL_CONTEXTUAL
    return Graph(adjacency=g.adjacency.copy(), features=features, labels=labels)


def inject_benchmark(g: Graph, spec: InjectionSpec) -> Graph:
    """Structural then contextual injection on disjoint node pools."""
    if g.labels is not None and np.any(g.labels != LABEL_NORMAL):
        raise ConfigError("refusing to inject into an already-labeled graph")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x1A9]))
    out = inject_structural(g, spec.num_cliques, spec.clique_size, rng)
    out = inject_contextual(out, spec.contextual_count, spec.candidate_pool, rng)
    return out
