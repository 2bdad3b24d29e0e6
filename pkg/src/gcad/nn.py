"""Numerical core: GCN layer math, bilinear discriminator, contrastive BCE and
Adam, all in plain numpy with hand-derived gradients (no autodiff framework).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

from .errors import DimensionError, NumericalError
from .graph import NormalizedAdjacency

SCORE_FLOOR = 1e-7


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def gcn_forward(adj, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One GCN layer: relu(A_hat X W)."""
    if isinstance(adj, NormalizedAdjacency):
        adj = adj.values
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"feature dim {x.shape[1]} != weight rows {w.shape[0]}")
    if adj.shape[1] != x.shape[0]:
        raise DimensionError(f"adjacency cols {adj.shape[1]} != feature rows {x.shape[0]}")
    return relu(adj @ (x @ w))


def backbone_forward(adj, x: np.ndarray, weights: list[np.ndarray]) -> np.ndarray:
    """Stacked GCN layers sharing one normalized adjacency."""
    h = x
    for w in weights:
        h = gcn_forward(adj, h, w)
    return h


def node_embed(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Single-node mapping relu(x W): the 1-node graph degenerates to A_hat = 1."""
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"feature dim {x.shape[-1]} != weight rows {w.shape[0]}")
    return relu(x @ w)


def node_backbone_forward(x: np.ndarray, weights: list[np.ndarray]) -> np.ndarray:
    h = x
    for w in weights:
        h = node_embed(h, w)
    return h


def readout_mean(h: np.ndarray) -> np.ndarray:
    """Column means; pools a subgraph's node embeddings into one vector."""
    if h.shape[0] < 1:
        raise DimensionError("readout needs at least one row")
    return h.mean(axis=0)


def bilinear_score(a: np.ndarray, b: np.ndarray, disc: np.ndarray) -> float:
    """sigmoid(a^T B b); the discriminator's consistency score in (0, 1)."""
    if a.shape[-1] != disc.shape[0] or b.shape[-1] != disc.shape[1]:
        raise DimensionError(
            f"vectors of dim {a.shape[-1]}/{b.shape[-1]} vs bilinear {disc.shape}")
    return float(sigmoid(a @ disc @ b))


def bilinear_scores_batch(a: np.ndarray, b: np.ndarray, disc: np.ndarray) -> np.ndarray:
    """(B,) scores sigmoid(a_i^T B b_i) for row-aligned batches."""
    return sigmoid(np.einsum("bi,ij,bj->b", a, disc, b))


def contrast_bce(y_pos: np.ndarray, y_neg: np.ndarray) -> float:
    """-(1/n) sum [log y_pos + log(1 - y_neg)], scores clamped at 1e-7."""
    y_pos = np.atleast_1d(np.asarray(y_pos, dtype=np.float64))
    y_neg = np.atleast_1d(np.asarray(y_neg, dtype=np.float64))
    if y_pos.shape != y_neg.shape:
        raise DimensionError("positive and negative batches must match in size")
    y_pos = np.clip(y_pos, SCORE_FLOOR, 1.0 - SCORE_FLOOR)
    y_neg = np.clip(y_neg, SCORE_FLOOR, 1.0 - SCORE_FLOOR)
    return float(-np.mean(np.log(y_pos) + np.log(1.0 - y_neg)))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class ModelParams:
    """Two GCN backbones plus one bilinear discriminator per contrast pair."""

    backbones: tuple[list[np.ndarray], list[np.ndarray]]
    discriminators: list[np.ndarray]

    @property
    def hidden_dim(self) -> int:
        return self.backbones[0][-1].shape[1]

    @property
    def input_dim(self) -> int:
        return self.backbones[0][0].shape[0]

    def flat(self) -> list[np.ndarray]:
        return [*self.backbones[0], *self.backbones[1], *self.discriminators]

    def copy(self) -> "ModelParams":
        return ModelParams(
            backbones=([w.copy() for w in self.backbones[0]],
                       [w.copy() for w in self.backbones[1]]),
            discriminators=[b.copy() for b in self.discriminators])


@dataclass
class ModelGradients:
    backbones: tuple[list[np.ndarray], list[np.ndarray]]
    discriminators: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "ModelGradients":
        return cls(backbones=([np.zeros_like(w) for w in params.backbones[0]],
                              [np.zeros_like(w) for w in params.backbones[1]]),
                   discriminators=[np.zeros_like(b) for b in params.discriminators])

    def flat(self) -> list[np.ndarray]:
        return [*self.backbones[0], *self.backbones[1], *self.discriminators]


def init_params(input_dim: int, hidden_dim: int, num_pairs: int,
                rng: np.random.Generator, num_layers: int = 1) -> ModelParams:
    def stack():
        dims = [input_dim] + [hidden_dim] * num_layers
        return [glorot_uniform(rng, dims[i], dims[i + 1]) for i in range(num_layers)]

    return ModelParams(
        backbones=(stack(), stack()),
        discriminators=[glorot_uniform(rng, hidden_dim, hidden_dim)
                        for _ in range(num_pairs)])


@dataclass
class AdamState:
    """First/second-moment accumulators mirroring a flat parameter list."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: ModelParams, lr: float) -> "AdamState":
        flat = params.flat()
        return cls(lr=lr,
                   m=[np.zeros_like(p) for p in flat],
                   v=[np.zeros_like(p) for p in flat])


def adam_step(params: ModelParams, grads: ModelGradients, state: AdamState) -> None:
    """In-place Adam update with bias correction."""
    flat_p = params.flat()
    flat_g = grads.flat()
    if len(flat_p) != len(state.m):
        raise DimensionError("optimizer state does not match parameter list")
    for g in flat_g:
        if not np.isfinite(g).all():
            raise NumericalError("non-finite gradient; training aborted")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(flat_p, flat_g, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
