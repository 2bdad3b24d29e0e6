"""Training loop: batching, per-epoch augmentation refresh, instance
resampling, loss assembly and Adam updates. Fully unsupervised; anomaly labels
are never read here.
"""
from __future__ import annotations

import json
import time
import zipfile
from dataclasses import dataclass, field

import numpy as np

from .augmentation import Augmenter, AugmentationSpec
from .contrast import CombinationConfig, batch_forward, compute_gradients, total_loss
from .errors import CheckpointError, ConfigError, NumericalError
from .graph import Graph
from .nn import AdamState, ModelParams, adam_step, init_params
from .sampling import SubgraphSampler

CHECKPOINT_FORMAT = 1

# seed-stream tags so every stochastic stage draws from its own child stream
_TAG_INIT, _TAG_EPOCH, _TAG_SCORE = 0, 1, 2
_SUB_AUG, _SUB_BATCHES, _SUB_SAMPLE, _SUB_SHIFT = 0, 1, 2, 3


def stream(seed: int, *tags: int) -> np.random.Generator:
    """Deterministic child generator for a (seed, tags...) coordinate."""
    return np.random.default_rng(np.random.SeedSequence([seed, *tags]))


@dataclass(frozen=True)
class TrainConfig:
    combination: CombinationConfig
    epochs: int = 100
    lr: float = 1e-3
    hidden_dim: int = 64
    batch_size: int = 300
    subgraph_size: int = 4
    restart_p: float = 0.5
    gcn_layers: int = 1
    augmentation: AugmentationSpec | None = None
    normalize_features: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (negative shift needs it)")
        if self.subgraph_size < 1:
            raise ConfigError("subgraph_size must be >= 1")
        if self.gcn_layers < 1:
            raise ConfigError("gcn_layers must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.combination.uses_augmented and (
                self.augmentation is None or not self.augmentation.steps):
            raise ConfigError(
                "combination uses augmented views (ids 7-12) but the "
                "augmentation step list is empty")

    def to_dict(self) -> dict:
        aug = None
        if self.augmentation is not None:
            aug = {"steps": [{k: v for k, v in vars(s).items() if v is not None}
                             for s in self.augmentation.steps],
                   "seed": self.augmentation.seed,
                   "per_node_mask": self.augmentation.per_node_mask,
                   "binarize_diffusion": self.augmentation.binarize_diffusion}
        return {"combination": [list(p) for p in self.combination.pairs],
                "weights": list(self.combination.weights),
                "epochs": self.epochs, "lr": self.lr,
                "hidden_dim": self.hidden_dim, "batch_size": self.batch_size,
                "subgraph_size": self.subgraph_size, "restart_p": self.restart_p,
                "gcn_layers": self.gcn_layers, "augmentation": aug,
                "normalize_features": self.normalize_features, "seed": self.seed}


@dataclass
class TrainLog:
    losses: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    checkpoint_path: str | None = None


def normalize_feature_rows(x: np.ndarray) -> np.ndarray:
    """Row-sum normalization; zero rows stay zero."""
    sums = x.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(sums != 0.0, x / sums, 0.0)
    return scaled


def make_batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random permutation of all nodes in chunks; a trailing chunk of one node
    is merged into the previous chunk so every batch can host a negative shift."""
    if n < 2:
        raise ConfigError("need at least two nodes to form batches")
    perm = rng.permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and batches[-1].size < 2:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def _working_features(g: Graph, cfg: TrainConfig) -> np.ndarray:
    return normalize_feature_rows(g.features) if cfg.normalize_features else g.features


def prepared_graph(g: Graph, cfg: TrainConfig) -> Graph:
    """Label-free copy with the training-time feature transform applied."""
    return Graph(adjacency=g.adjacency, features=_working_features(g, cfg),
                 labels=None)


def draw_shift_perm(batch_size: int, rng: np.random.Generator) -> np.ndarray:
    shift = int(rng.integers(1, batch_size))
    return (np.arange(batch_size) + shift) % batch_size


def train(g: Graph, cfg: TrainConfig, log_every: int | None = None,
          log_fn=print) -> tuple[ModelParams, TrainLog]:
    """Run the full epoch schedule and return final parameters plus the log."""
    work = prepared_graph(g, cfg)
    params = init_params(work.d, cfg.hidden_dim, len(cfg.combination.pairs),
                         stream(cfg.seed, _TAG_INIT), num_layers=cfg.gcn_layers)
    adam = AdamState.for_params(params, cfg.lr)
    augmenter = Augmenter(cfg.augmentation) if cfg.combination.uses_augmented else None
    sampler = SubgraphSampler(work, cfg.subgraph_size, cfg.restart_p)

    log = TrainLog()
    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        batches = make_batches(work.n, cfg.batch_size,
                               stream(cfg.seed, _TAG_EPOCH, epoch, _SUB_BATCHES))
        aug_sampler = None
        if augmenter is not None:
            aug_graph = augmenter.refresh(
                work, stream(cfg.seed, _TAG_EPOCH, epoch, _SUB_AUG))
            aug_sampler = SubgraphSampler(aug_graph, cfg.subgraph_size,
                                          cfg.restart_p)
        shift_rng = stream(cfg.seed, _TAG_EPOCH, epoch, _SUB_SHIFT)

        epoch_loss = 0.0
        for b_idx, targets in enumerate(batches):
            sample_rng = stream(cfg.seed, _TAG_EPOCH, epoch, _SUB_SAMPLE, b_idx)
            slot_batches = {"original": sampler.instances(targets, sample_rng)}
            if aug_sampler is not None:
                slot_batches["augmented"] = aug_sampler.instances(targets, sample_rng)
            perm = draw_shift_perm(targets.size, shift_rng)
            trace = batch_forward(slot_batches, params, cfg.combination, perm)
            loss = total_loss(trace)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} batch {b_idx}")
            adam_step(params, compute_gradients(trace), adam)
            epoch_loss += loss * targets.size
        log.losses.append(epoch_loss / work.n)
        log.seconds.append(time.perf_counter() - tic)
        if log_every and (epoch + 1) % log_every == 0:
            log_fn(f"epoch {epoch + 1}/{cfg.epochs} "
                   f"loss {log.losses[-1]:.4f} ({log.seconds[-1]:.1f}s)")
    return params, log


def save_checkpoint(params: ModelParams, cfg: TrainConfig, path) -> None:
    """NPZ container: named weight matrices, a config echo and a format tag."""
    arrays = {"format_version": np.array(CHECKPOINT_FORMAT),
              "config_json": np.array(json.dumps(cfg.to_dict())),
              "num_layers": np.array(len(params.backbones[0])),
              "num_discriminators": np.array(len(params.discriminators))}
    for side in (0, 1):
        for layer, w in enumerate(params.backbones[side]):
            arrays[f"backbone{side}_layer{layer}"] = w
    for k, disc in enumerate(params.discriminators):
        arrays[f"discriminator{k}"] = disc
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    try:
        with np.load(path, allow_pickle=False) as data:
            if "format_version" not in data:
                raise CheckpointError(f"{path}: not a checkpoint file")
            version = int(data["format_version"])
            if version != CHECKPOINT_FORMAT:
                raise CheckpointError(
                    f"{path}: checkpoint format {version}, expected "
                    f"{CHECKPOINT_FORMAT}")
            layers = int(data["num_layers"])
            discs = int(data["num_discriminators"])
            params = ModelParams(
                backbones=([data[f"backbone0_layer{l}"] for l in range(layers)],
                           [data[f"backbone1_layer{l}"] for l in range(layers)]),
                discriminators=[data[f"discriminator{k}"] for k in range(discs)])
            config_echo = json.loads(str(data["config_json"]))
    except (zipfile.BadZipFile, OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt or truncated checkpoint "
                              f"({exc})") from exc
    return params, config_echo
