"""Random-walk-with-restart subgraph sampling and instance assembly.

Each instance is one target node's sampled neighborhood: the target sits at
position 0, the list is padded with the target when the walk cannot reach m
distinct nodes, and the target's own feature row is masked to zero inside the
subgraph block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ConfigError
from .graph import Graph, NormalizedAdjacency, induced_subgraph, normalize_dense_local


def _default_budget(m: int, restart_p: float) -> int:
    return int(10 * m / restart_p)


def rwr_sample(g: Graph, target: int, m: int, restart_p: float,
               rng: np.random.Generator, step_budget: int | None = None) -> np.ndarray:
    """Collect up to m distinct nodes around target in first-visit order.

    The walk starts at the target; each step restarts with probability
    restart_p, otherwise moves to a uniform neighbor. The list is padded with
    the target once the step budget runs out.
    """
    if m < 1:
        raise ConfigError("subgraph size m must be >= 1")
    if not 0.0 < restart_p <= 1.0:
        raise ConfigError("restart probability must be in (0, 1]")
    if target < 0 or target >= g.n:
        raise BoundsError(f"target {target} out of range [0, {g.n})")
    budget = _default_budget(m, restart_p) if step_budget is None else step_budget

    indptr, indices = g.adjacency.indptr, g.adjacency.indices
    visited = [target]
    current = target
    for _ in range(budget):
        if len(visited) == m:
            break
        if rng.random() < restart_p:
            current = target
            continue
        start, end = indptr[current], indptr[current + 1]
        if end == start:  # isolated target: the walk can never leave
            break
        current = int(indices[start + int(rng.random() * (end - start))])
        if current not in visited:
            visited.append(current)
    visited.extend([target] * (m - len(visited)))
    return np.array(visited, dtype=np.int64)


@dataclass(frozen=True)
class Instance:
    """One target node's training/inference entry."""

    target: int
    nodes: np.ndarray                 # (m,), nodes[0] == target
    local_adj: NormalizedAdjacency    # m x m
    features_masked: np.ndarray       # (m, d), row 0 zeroed
    target_feature: np.ndarray        # (d,), the unmasked row


def build_instance(g: Graph, target: int, m: int, restart_p: float,
                   rng: np.random.Generator) -> Instance:
    nodes = rwr_sample(g, target, m, restart_p, rng)
    local_adj, block = induced_subgraph(g, nodes)
    target_feature = block[0].copy()
    block[0] = 0.0
    return Instance(target=int(target), nodes=nodes, local_adj=local_adj,
                    features_masked=block, target_feature=target_feature)


@dataclass(frozen=True)
class InstanceBatch:
    """Vectorized batch of instances over one graph.

    features is a reference to the full (n, d) matrix; per-instance blocks are
    gathered lazily by consumers. The target feature mask is applied after the
    feature/weight product (masking a row commutes with a row-wise linear map).
    """

    targets: np.ndarray    # (B,)
    nodes: np.ndarray      # (B, m), column 0 == targets
    local_adj: np.ndarray  # (B, m, m) normalized, symmetric
    features: np.ndarray   # (n, d), shared reference


class SubgraphSampler:
    """Lockstep-vectorized RWR sampler plus local-adjacency assembly.

    Walk semantics per target match rwr_sample; all walks in a batch advance
    together and draw from one generator, so per-batch results are
    deterministic given the generator state.
    """

    def __init__(self, g: Graph, m: int, restart_p: float,
                 step_budget: int | None = None):
        if m < 1:
            raise ConfigError("subgraph size m must be >= 1")
        if not 0.0 < restart_p <= 1.0:
            raise ConfigError("restart probability must be in (0, 1]")
        self.m = m
        self.restart_p = restart_p
        self.budget = _default_budget(m, restart_p) if step_budget is None else step_budget
        self.n = g.n
        self.features = g.features
        adj = g.adjacency
        self.indptr = adj.indptr
        self.indices = adj.indices
        self.degrees = np.diff(adj.indptr)
        # sorted u*n+v keys for O(log E) vectorized edge membership tests
        coo = adj.tocoo()
        self.edge_keys = np.sort(coo.row.astype(np.int64) * g.n + coo.col)

    def sample_nodes(self, targets: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """(B, m) node lists; unfilled slots stay equal to the target (padding)."""
        targets = np.asarray(targets, dtype=np.int64)
        b = targets.shape[0]
        visited = np.tile(targets[:, None], (1, self.m))
        count = np.ones(b, dtype=np.int64)
        current = targets.copy()
        if self.m == 1:
            return visited
        for _ in range(self.budget):
            # walks whose start is isolated can never collect anything new
            active = np.flatnonzero((count < self.m) & (self.degrees[current] > 0))
            if active.size == 0:
                break
            restart = rng.random(active.size) < self.restart_p
            nxt = np.empty(active.size, dtype=np.int64)
            nxt[restart] = targets[active[restart]]
            movers = active[~restart]
            deg = self.degrees[current[movers]]
            offsets = (rng.random(movers.size) * deg).astype(np.int64)
            nxt[~restart] = self.indices[self.indptr[current[movers]] + offsets]
            current[active] = nxt
            # padding slots hold the target, so one row-wide comparison both
            # checks membership and respects the fill level
            is_new = ~np.any(visited[active] == nxt[:, None], axis=1)
            hits = active[is_new]
            visited[hits, count[hits]] = nxt[is_new]
            count[hits] += 1
        return visited

    def local_adjacency(self, nodes: np.ndarray) -> np.ndarray:
        """(B, m, m) normalized local adjacency for (B, m) node lists."""
        b, m = nodes.shape
        u = np.repeat(nodes, m, axis=1).reshape(b, m, m)
        v = np.tile(nodes, (1, m)).reshape(b, m, m)
        keys = u.astype(np.int64) * self.n + v
        pos = np.searchsorted(self.edge_keys, keys)
        pos = np.minimum(pos, self.edge_keys.size - 1) if self.edge_keys.size else pos
        if self.edge_keys.size:
            local = (self.edge_keys[pos] == keys).astype(np.float64)
        else:
            local = np.zeros_like(keys, dtype=np.float64)
        a_bar = local + np.eye(m)[None, :, :]
        inv_sqrt = 1.0 / np.sqrt(a_bar.sum(axis=2))
        return a_bar * inv_sqrt[:, :, None] * inv_sqrt[:, None, :]

    def instances(self, targets: np.ndarray, rng: np.random.Generator) -> InstanceBatch:
        nodes = self.sample_nodes(np.asarray(targets, dtype=np.int64), rng)
        return InstanceBatch(targets=np.asarray(targets, dtype=np.int64),
                             nodes=nodes,
                             local_adj=self.local_adjacency(nodes),
                             features=self.features)
