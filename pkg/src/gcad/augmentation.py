"""Graph augmentation: feature masking, edge perturbation and diffusion.

Structural steps rewrite the adjacency, feature steps rewrite X; a spec is an
ordered list of steps applied left to right. Diffusion outputs are sparsified
and (by default) binarized so downstream code keeps seeing a 0/1 adjacency.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigError, DegenerateDegreeError, NumericalError
from .graph import Graph, adjacency_from_edges, undirected_edge_list

STOCHASTIC_OPS = ("mask_features", "remove_edges", "flip_edges")
DIFFUSION_OPS = ("ppr", "heat")

DEFAULT_ALPHA = 0.15
DEFAULT_T = 5.0
DEFAULT_KEEP_EPS = 1e-4
_SOLVE_RESIDUAL_TOL = 1e-8
_TAYLOR_TAIL = 1e-9


@dataclass(frozen=True)
class AugmentationStep:
    op: str
    p: float | None = None
    alpha: float | None = None
    t: float | None = None
    keep_eps: float | None = None

    def __post_init__(self):
        if self.op in STOCHASTIC_OPS:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ConfigError(f"{self.op} needs a ratio p in [0, 1]")
        elif self.op == "ppr":
            alpha = DEFAULT_ALPHA if self.alpha is None else self.alpha
            if not 0.0 < alpha < 1.0:
                raise ConfigError("ppr teleport alpha must be in (0, 1)")
            object.__setattr__(self, "alpha", alpha)
            self._default_eps()
        elif self.op == "heat":
            t = DEFAULT_T if self.t is None else self.t
            if t <= 0.0:
                raise ConfigError("heat diffusion time t must be > 0")
            object.__setattr__(self, "t", t)
            self._default_eps()
        else:
            raise ConfigError(f"unknown augmentation op {self.op!r}")

    def _default_eps(self):
        eps = DEFAULT_KEEP_EPS if self.keep_eps is None else self.keep_eps
        if eps < 0.0:
            raise ConfigError("keep_eps must be >= 0")
        object.__setattr__(self, "keep_eps", eps)


@dataclass(frozen=True)
class AugmentationSpec:
    steps: tuple[AugmentationStep, ...] = ()
    seed: int = 0
    per_node_mask: bool = False     # Bernoulli mask per node instead of one shared mask
    binarize_diffusion: bool = True

    @classmethod
    def from_dicts(cls, steps, seed=0, per_node_mask=False, binarize_diffusion=True):
        parsed = tuple(AugmentationStep(**s) for s in steps)
        return cls(steps=parsed, seed=seed, per_node_mask=per_node_mask,
                   binarize_diffusion=binarize_diffusion)

    @property
    def has_stochastic(self) -> bool:
        return any(s.op in STOCHASTIC_OPS for s in self.steps)


def mask_features(x: np.ndarray, p: float, rng: np.random.Generator,
                  per_node: bool = False) -> np.ndarray:
    """Zero feature columns via one Bernoulli(1-p) keep mask shared by all rows."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError("mask probability must be in [0, 1]")
    shape = x.shape if per_node else (1, x.shape[1])
    keep = rng.random(shape) >= p
    return x * keep


def remove_edges(adjacency: sp.csr_matrix, p: float,
                 rng: np.random.Generator) -> sp.csr_matrix:
    """Delete round(p*E) uniformly chosen undirected edges (both directions)."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError("removal ratio must be in [0, 1]")
    edges = undirected_edge_list(adjacency)
    n_remove = int(round(p * edges.shape[0]))
    if n_remove == 0:
        return adjacency.copy()
    drop = rng.choice(edges.shape[0], size=n_remove, replace=False)
    keep = np.ones(edges.shape[0], dtype=bool)
    keep[drop] = False
    return adjacency_from_edges(adjacency.shape[0], edges[keep])


def draw_flip_locations(adjacency: sp.csr_matrix, p: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Choose the undirected pairs to flip: half existing edges, half non-edges."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError("perturbation ratio must be in [0, 1]")
    n = adjacency.shape[0]
    edges = undirected_edge_list(adjacency)
    num_edges = edges.shape[0]
    n_flip = int(round(p * num_edges))
    n_off = n_flip // 2
    n_on = n_flip - n_off
    if n_off > num_edges:
        raise CapacityError(f"cannot pick {n_off} existing edges from {num_edges}")
    max_pairs = n * (n - 1) // 2
    if n_on > max_pairs - num_edges:
        raise CapacityError(
            f"cannot pick {n_on} non-edges: graph too dense ({num_edges} of "
            f"{max_pairs} pairs occupied)")

    chosen = []
    if n_off:
        off_idx = rng.choice(num_edges, size=n_off, replace=False)
        chosen.extend(map(tuple, edges[off_idx]))
    existing = {tuple(e) for e in edges}
    picked = set()
    while len(picked) < n_on:
        u = int(rng.integers(0, n))
        v = int(rng.integers(0, n))
        if u == v:
            continue
        pair = (min(u, v), max(u, v))
        if pair in existing or pair in picked:
            continue
        picked.add(pair)
    chosen.extend(sorted(picked))
    return np.array(chosen, dtype=np.int64).reshape(-1, 2)


def apply_edge_flips(adjacency: sp.csr_matrix, locations: np.ndarray) -> sp.csr_matrix:
    """A (1-L) + (1-A) L restricted to the chosen pairs; involutive."""
    flipped = {tuple(e) for e in undirected_edge_list(adjacency)}
    for u, v in locations:
        pair = (min(int(u), int(v)), max(int(u), int(v)))
        if pair in flipped:
            flipped.remove(pair)
        else:
            flipped.add(pair)
    return adjacency_from_edges(adjacency.shape[0], np.array(sorted(flipped)))


def flip_edges(adjacency: sp.csr_matrix, p: float,
               rng: np.random.Generator) -> sp.csr_matrix:
    return apply_edge_flips(adjacency, draw_flip_locations(adjacency, p, rng))


def _degree_checked(adjacency: sp.csr_matrix) -> np.ndarray:
    deg = np.asarray(adjacency.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise DegenerateDegreeError(
            f"{int(np.sum(deg == 0))} zero-degree nodes; diffusion needs "
            "every node to have at least one edge")
    return deg


def _sparsify(s: np.ndarray, keep_eps: float, binarize: bool) -> sp.csr_matrix:
    s = (s + s.T) / 2.0
    np.fill_diagonal(s, 0.0)
    s[np.abs(s) < keep_eps] = 0.0
    if binarize:
        s = (s != 0.0).astype(np.float64)
    return sp.csr_matrix(s)


def ppr_matrix(adjacency: sp.csr_matrix, alpha: float) -> np.ndarray:
    """Dense personalized-PageRank diffusion alpha (I - (1-alpha) T)^{-1}."""
    deg = _degree_checked(adjacency)
    inv_sqrt = 1.0 / np.sqrt(deg)
    t_sym = adjacency.toarray() * inv_sqrt[:, None] * inv_sqrt[None, :]
    system = np.eye(adjacency.shape[0]) - (1.0 - alpha) * t_sym
    s = np.linalg.solve(system, alpha * np.eye(adjacency.shape[0]))
    residual = np.max(np.abs(system @ s - alpha * np.eye(adjacency.shape[0])))
    if residual > _SOLVE_RESIDUAL_TOL:
        raise NumericalError(f"PPR solve residual {residual:.3e} above "
                             f"{_SOLVE_RESIDUAL_TOL:.0e}")
    return s


def ppr_diffuse(adjacency: sp.csr_matrix, alpha: float,
                keep_eps: float = DEFAULT_KEEP_EPS,
                binarize: bool = True) -> sp.csr_matrix:
    if not 0.0 < alpha < 1.0:
        raise ConfigError("ppr teleport alpha must be in (0, 1)")
    return _sparsify(ppr_matrix(adjacency, alpha), keep_eps, binarize)


def heat_matrix(adjacency: sp.csr_matrix, t: float) -> np.ndarray:
    """Dense heat-kernel diffusion e^{-t} exp(t A D^{-1}) via Taylor summation.

    The truncation order K is the smallest with Poisson tail
    e^{-t} sum_{k>K} t^k/k! below 1e-9; entries of (A D^{-1})^k stay in [0, 1]
    because the matrix is column-stochastic, so the same bound caps the
    entrywise truncation error.
    """
    deg = _degree_checked(adjacency)
    walk = adjacency.toarray() / deg[None, :]
    n = adjacency.shape[0]
    term_weight = np.exp(-t)     # e^{-t} t^k / k!, starting at k=0
    remaining = 1.0 - term_weight
    s = np.eye(n) * term_weight
    power = np.eye(n)
    k = 0
    k_cap = int(4 * t) + 200  # Poisson tail is far below 1e-9 by here
    while remaining > _TAYLOR_TAIL and k < k_cap:
        k += 1
        power = power @ walk
        term_weight *= t / k
        s += term_weight * power
        remaining -= term_weight
    return s


def heat_diffuse(adjacency: sp.csr_matrix, t: float,
                 keep_eps: float = DEFAULT_KEEP_EPS,
                 binarize: bool = True) -> sp.csr_matrix:
    if t <= 0.0:
        raise ConfigError("heat diffusion time t must be > 0")
    return _sparsify(heat_matrix(adjacency, t), keep_eps, binarize)


def _adjacency_fingerprint(adjacency: sp.csr_matrix) -> tuple:
    digest = hashlib.blake2b(digest_size=16)
    digest.update(adjacency.indptr.tobytes())
    digest.update(adjacency.indices.tobytes())
    return (adjacency.shape[0], adjacency.nnz, digest.hexdigest())


class Augmenter:
    """Applies an AugmentationSpec; stochastic steps are re-drawn per call while
    diffusion results are cached on their input adjacency (computed once per
    run for every configuration that does not reshuffle edges before
    diffusing)."""

    def __init__(self, spec: AugmentationSpec):
        self.spec = spec
        self._diffusion_cache: dict[tuple, sp.csr_matrix] = {}

    def refresh(self, g: Graph, rng: np.random.Generator) -> Graph:
        adjacency, features = g.adjacency, g.features
        for step in self.spec.steps:
            if step.op == "mask_features":
                features = mask_features(features, step.p, rng,
                                         per_node=self.spec.per_node_mask)
            elif step.op == "remove_edges":
                adjacency = remove_edges(adjacency, step.p, rng)
            elif step.op == "flip_edges":
                adjacency = flip_edges(adjacency, step.p, rng)
            else:
                key = (step.op, step.alpha, step.t, step.keep_eps,
                       self.spec.binarize_diffusion,
                       _adjacency_fingerprint(adjacency))
                if key not in self._diffusion_cache:
                    if step.op == "ppr":
                        out = ppr_diffuse(adjacency, step.alpha, step.keep_eps,
                                          self.spec.binarize_diffusion)
                    else:
                        out = heat_diffuse(adjacency, step.t, step.keep_eps,
                                           self.spec.binarize_diffusion)
                    self._diffusion_cache[key] = out
                adjacency = self._diffusion_cache[key]
        return Graph(adjacency=adjacency, features=features, labels=g.labels)


def compose_augmentation(g: Graph, spec: AugmentationSpec) -> Graph:
    """One-shot application of spec, seeded from spec.seed."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xA06]))
    return Augmenter(spec).refresh(g, rng)
