"""Multi-round anomaly scoring and AUC evaluation.

Each round resamples every node's subgraph (and refreshes stochastic
augmentation), records positive/negative discriminator scores per contrast
pair, and the per-node score is mean + population std of (negative - positive)
over rounds, combined across pairs by the configured weights.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .augmentation import Augmenter
from .contrast import (GRAPH_AUGMENTED, GRAPH_ORIGINAL, KIND_MASKED_NODE,
                       KIND_NODE, KIND_SUBGRAPH, decode_view, encode_view)
from .errors import DimensionError, MetricUndefinedError
from .graph import Graph, LABEL_TO_KIND
from .nn import ModelParams, bilinear_scores_batch, node_backbone_forward, relu
from .sampling import SubgraphSampler
from .trainer import (TrainConfig, _TAG_SCORE, _SUB_AUG, _SUB_BATCHES,
                      _SUB_SAMPLE, _SUB_SHIFT, draw_shift_perm, make_batches,
                      prepared_graph, stream)


class _SlotScorer:
    """Frozen-parameter view evaluation for one graph slot.

    With fixed weights the first-layer projection X W1 and the node embeddings
    are shared by every round, so per-batch work reduces to gathers and the
    tiny local-adjacency mixing.
    """

    def __init__(self, graph: Graph, params: ModelParams, gnn_slots: set[int],
                 subgraph_size: int, restart_p: float):
        self.sampler = SubgraphSampler(graph, subgraph_size, restart_p)
        self.features = graph.features
        self.weights = {s: params.backbones[s - 1] for s in gnn_slots}
        self.xw1 = {s: graph.features @ w[0] for s, w in self.weights.items()}
        self.z = {s: node_backbone_forward(graph.features, w)
                  for s, w in self.weights.items()}

    def views(self, targets: np.ndarray, rng: np.random.Generator,
              kinds_per_slot: dict[int, set[str]]) -> dict[tuple[int, str], np.ndarray]:
        batch = self.sampler.instances(targets, rng)
        b, m = batch.nodes.shape
        out: dict[tuple[int, str], np.ndarray] = {}
        for gnn_slot, kinds in kinds_per_slot.items():
            if kinds & {KIND_SUBGRAPH, KIND_MASKED_NODE}:
                y = self.xw1[gnn_slot][batch.nodes.reshape(-1)].reshape(b, m, -1)
                y[:, 0, :] = 0.0
                h = relu(np.einsum("bij,bjh->bih", batch.local_adj, y))
                for w in self.weights[gnn_slot][1:]:
                    y = h @ w
                    h = relu(np.einsum("bij,bjh->bih", batch.local_adj, y))
                if KIND_SUBGRAPH in kinds:
                    out[(gnn_slot, KIND_SUBGRAPH)] = h.mean(axis=1)
                if KIND_MASKED_NODE in kinds:
                    out[(gnn_slot, KIND_MASKED_NODE)] = h[:, 0, :]
            if KIND_NODE in kinds:
                out[(gnn_slot, KIND_NODE)] = self.z[gnn_slot][targets]
        return out


@dataclass
class RoundScores:
    """Raw per-round discriminator outputs: arrays of shape (pairs, R, n)."""

    y_pos: np.ndarray
    y_neg: np.ndarray

    @property
    def rounds(self) -> int:
        return self.y_pos.shape[1]


def _validate_params(g: Graph, params: ModelParams, cfg: TrainConfig) -> None:
    if params.input_dim != g.d:
        raise DimensionError(f"checkpoint expects {params.input_dim} features, "
                             f"graph has {g.d}")
    if params.hidden_dim != cfg.hidden_dim:
        raise DimensionError(f"checkpoint hidden dim {params.hidden_dim} != "
                             f"configured {cfg.hidden_dim}")
    if len(params.backbones[0]) != cfg.gcn_layers:
        raise DimensionError(f"checkpoint has {len(params.backbones[0])} GCN "
                             f"layers, config says {cfg.gcn_layers}")
    if len(params.discriminators) != len(cfg.combination.pairs):
        raise DimensionError(
            f"checkpoint carries {len(params.discriminators)} discriminators "
            f"for {len(cfg.combination.pairs)} pairs")


def score_rounds(g: Graph, params: ModelParams, cfg: TrainConfig, rounds: int,
                 seed: int, refresh_augmentation: bool = True) -> RoundScores:
    """Collect positive/negative scores for every node over `rounds` rounds."""
    if rounds < 1:
        raise DimensionError("rounds must be >= 1")
    _validate_params(g, params, cfg)
    work = prepared_graph(g, cfg)
    combo = cfg.combination
    decoded = [decode_view(v) for v in combo.needed_views]
    kinds_by_graph: dict[str, dict[int, set[str]]] = {}
    for view in decoded:
        kinds_by_graph.setdefault(view.graph_slot, {}).setdefault(
            view.gnn_slot, set()).add(view.kind)

    scorers: dict[str, _SlotScorer] = {}
    if GRAPH_ORIGINAL in kinds_by_graph:
        scorers[GRAPH_ORIGINAL] = _SlotScorer(
            work, params, set(kinds_by_graph[GRAPH_ORIGINAL]),
            cfg.subgraph_size, cfg.restart_p)
    augmenter = (Augmenter(cfg.augmentation)
                 if GRAPH_AUGMENTED in kinds_by_graph else None)

    n_pairs = len(combo.pairs)
    y_pos = np.zeros((n_pairs, rounds, work.n))
    y_neg = np.zeros((n_pairs, rounds, work.n))

    for r in range(rounds):
        if augmenter is not None and (refresh_augmentation or r == 0):
            aug_graph = augmenter.refresh(
                work, stream(seed, _TAG_SCORE, r, _SUB_AUG))
            scorers[GRAPH_AUGMENTED] = _SlotScorer(
                aug_graph, params, set(kinds_by_graph[GRAPH_AUGMENTED]),
                cfg.subgraph_size, cfg.restart_p)
        batches = make_batches(work.n, cfg.batch_size,
                               stream(seed, _TAG_SCORE, r, _SUB_BATCHES))
        shift_rng = stream(seed, _TAG_SCORE, r, _SUB_SHIFT)
        for b_idx, targets in enumerate(batches):
            sample_rng = stream(seed, _TAG_SCORE, r, _SUB_SAMPLE, b_idx)
            slot_views: dict[int, np.ndarray] = {}
            for graph_slot, per_gnn in kinds_by_graph.items():
                got = scorers[graph_slot].views(targets, sample_rng, per_gnn)
                for (gnn_slot, kind), value in got.items():
                    slot_views[encode_view(graph_slot, gnn_slot, kind)] = value
            perm = draw_shift_perm(targets.size, shift_rng)
            for k, pair in enumerate(combo.pairs):
                a, b = min(pair), max(pair)
                u, v = slot_views[a], slot_views[b]
                disc = params.discriminators[k]
                y_pos[k, r, targets] = bilinear_scores_batch(u, v, disc)
                y_neg[k, r, targets] = bilinear_scores_batch(u[perm], v, disc)
    return RoundScores(y_pos=y_pos, y_neg=y_neg)


def anomaly_score(y: np.ndarray, y_hat: np.ndarray) -> tuple[float, float, float]:
    """Mean, population std and their sum for one node/pair's round records."""
    diffs = np.asarray(y_hat, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    mean = float(diffs.mean())
    std = float(np.sqrt(np.mean((diffs - mean) ** 2)))
    return mean, std, mean + std


def pair_statistics(rounds: RoundScores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized anomaly_score over all pairs/nodes: (pairs, n) arrays."""
    diffs = rounds.y_neg - rounds.y_pos
    mean = diffs.mean(axis=1)
    std = np.sqrt(np.mean((diffs - mean[:, None, :]) ** 2, axis=1))
    return mean, std, mean + std


def combined_score(pair_f: np.ndarray, weights) -> np.ndarray:
    """Weighted sum of per-pair scores; weights follow combination order."""
    weights = np.asarray(weights, dtype=np.float64)
    if pair_f.shape[0] != weights.shape[0]:
        raise DimensionError(f"{pair_f.shape[0]} pair scores vs "
                             f"{weights.shape[0]} weights")
    return np.tensordot(weights, pair_f, axes=1)


def compute_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based (Mann-Whitney) AUC; ties contribute 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUC needs at least one node of each class")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    _, inverse, counts = np.unique(sorted_scores, return_inverse=True,
                                   return_counts=True)
    # average 1-based rank of each tie group
    group_rank = np.cumsum(counts) - (counts - 1) / 2.0
    ranks = np.empty(scores.size)
    ranks[order] = group_rank[inverse]
    rank_sum = ranks[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class ScoreReport:
    """Per-node anomaly scores plus the dataset-level summary."""

    node_scores: np.ndarray   # (n,) combined f
    pair_mean: np.ndarray     # (pairs, n)
    pair_std: np.ndarray      # (pairs, n)
    rounds: int
    seed: int
    config: dict
    labels: np.ndarray | None = None
    auc: float | None = None

    @property
    def n(self) -> int:
        return self.node_scores.shape[0]


def build_report(g: Graph, rounds: RoundScores, cfg: TrainConfig,
                 seed: int) -> ScoreReport:
    mean, std, pair_f = pair_statistics(rounds)
    f_all = combined_score(pair_f, cfg.combination.weights)
    auc = None
    if g.labels is not None and 0 < g.anomaly_mask().sum() < g.n:
        auc = compute_auc(f_all, g.anomaly_mask())
    return ScoreReport(node_scores=f_all, pair_mean=mean, pair_std=std,
                       rounds=rounds.rounds, seed=seed, config=cfg.to_dict(),
                       labels=g.labels, auc=auc)


def write_scores_csv(report: ScoreReport, path) -> None:
    n_pairs = report.pair_mean.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["node", "f"]
        for k in range(n_pairs):
            header += [f"mean_{k}", f"std_{k}"]
        header.append("label")
        writer.writerow(header)
        for node in range(report.n):
            row = [node, f"{report.node_scores[node]:.10g}"]
            for k in range(n_pairs):
                row += [f"{report.pair_mean[k, node]:.10g}",
                        f"{report.pair_std[k, node]:.10g}"]
            row.append(LABEL_TO_KIND[int(report.labels[node])]
                       if report.labels is not None else "")
            writer.writerow(row)


def write_summary_json(report: ScoreReport, path) -> None:
    payload = {"auc": report.auc, "rounds": report.rounds, "seed": report.seed,
               "nodes": report.n,
               "anomalies": (int(np.sum(report.labels != 0))
                             if report.labels is not None else None),
               "config": report.config}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
