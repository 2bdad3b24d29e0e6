import os
from pathlib import Path

import numpy as np
import pytest

from gcad.graph import Graph, adjacency_from_edges

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("GCAD_DATA_DIR", REPO_ROOT / "data"))


def dataset_path(name: str) -> Path | None:
    """Directory holding <name>/edges.txt + features.csv, or None if absent."""
    d = DATA_DIR / name
    if (d / "edges.txt").exists() and (d / "features.csv").exists():
        return d
    return None


def requires_dataset(name: str):
    return pytest.mark.skipif(
        dataset_path(name) is None,
        reason=(f"real {name} dataset not present under {DATA_DIR / name}; "
                "run scripts/fetch_datasets.py on a machine with network "
                "access (this sandbox has none) and re-run"))


def graph_from_edges(n: int, edges, d: int = 1, rng=None) -> Graph:
    features = (np.ones((n, d)) if rng is None
                else rng.random((n, d)))
    return Graph(adjacency=adjacency_from_edges(n, np.array(edges).reshape(-1, 2)),
                 features=features)


def random_graph(n: int, edge_prob: float, d: int, seed: int,
                 ensure_no_isolated: bool = False) -> Graph:
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < edge_prob
    mask = np.triu(mask, k=1)
    edges = list(zip(*np.nonzero(mask)))
    if ensure_no_isolated:
        edges.extend((i, (i + 1) % n) for i in range(n))  # cycle backbone
        edges = sorted({(min(u, v), max(u, v)) for u, v in edges})
    features = rng.random((n, d))
    return Graph(adjacency=adjacency_from_edges(n, np.array(edges).reshape(-1, 2)),
                 features=features)
