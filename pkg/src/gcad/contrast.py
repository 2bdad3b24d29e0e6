"""The 12-view combination pool: view identifiers, batched view computation,
contrast-pair losses and the exact gradients of the weighted combined loss.

Views are indexed in blocks of three over the four (graph, backbone) slots:
(original, GNN-1) = 1..3, (original, GNN-2) = 4..6, (augmented, GNN-1) = 7..9,
(augmented, GNN-2) = 10..12. Within a block the order is subgraph readout,
masked target node, plain node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, SamplingError
from .nn import (ModelGradients, ModelParams, SCORE_FLOOR,
                 bilinear_scores_batch, contrast_bce, relu)
from .sampling import InstanceBatch

GRAPH_ORIGINAL = "original"
GRAPH_AUGMENTED = "augmented"

KIND_SUBGRAPH = "subgraph"
KIND_MASKED_NODE = "masked_node"
KIND_NODE = "node"
_KIND_ORDER = (KIND_SUBGRAPH, KIND_MASKED_NODE, KIND_NODE)

SCALE_NODE_SUBGRAPH = "node_subgraph"
SCALE_NODE_NODE = "node_node"
SCALE_SUBGRAPH_SUBGRAPH = "subgraph_subgraph"
SCALE_MASKED_NODE_SUBGRAPH = "masked_node_subgraph"


@dataclass(frozen=True)
class ViewId:
    id: int
    graph_slot: str
    gnn_slot: int
    kind: str


def decode_view(view_id: int) -> ViewId:
    """Map 1..12 to its (graph slot, backbone, kind) decomposition."""
    if not 1 <= view_id <= 12:
        raise ConfigError(f"view id {view_id} outside 1..12")
    block, offset = divmod(view_id - 1, 3)
    return ViewId(id=view_id,
                  graph_slot=GRAPH_ORIGINAL if block < 2 else GRAPH_AUGMENTED,
                  gnn_slot=block % 2 + 1,
                  kind=_KIND_ORDER[offset])


def encode_view(graph_slot: str, gnn_slot: int, kind: str) -> int:
    block = 2 * (graph_slot == GRAPH_AUGMENTED) + (gnn_slot - 1)
    return 3 * block + _KIND_ORDER.index(kind) + 1


def pair_scale(a: int, b: int) -> str:
    """Classify a view pair by the kinds of its two sides."""
    kinds = {decode_view(a).kind, decode_view(b).kind}
    if kinds == {KIND_SUBGRAPH}:
        return SCALE_SUBGRAPH_SUBGRAPH
    if kinds == {KIND_SUBGRAPH, KIND_NODE}:
        return SCALE_NODE_SUBGRAPH
    if kinds == {KIND_SUBGRAPH, KIND_MASKED_NODE}:
        return SCALE_MASKED_NODE_SUBGRAPH
    # both sides are node-level views (plain or masked)
    return SCALE_NODE_NODE


@dataclass(frozen=True)
class CombinationConfig:
    """Weighted list of contrast pairs; weights follow config list order."""

    pairs: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.pairs) != len(self.weights):
            raise ConfigError("one weight per contrast pair required")
        if not self.pairs:
            raise ConfigError("combination needs at least one pair")
        canonical = []
        for a, b in self.pairs:
            decode_view(a), decode_view(b)
            if a == b:
                raise ConfigError(f"pair [{a},{b}] contrasts a view with itself")
            canonical.append((min(a, b), max(a, b)))
        if len(set(canonical)) != len(canonical):
            raise ConfigError("duplicate contrast pair in combination")
        object.__setattr__(self, "pairs", tuple(canonical))
        w = tuple(float(x) for x in self.weights)
        if any(x < 0 for x in w) or sum(w) <= 0:
            raise ConfigError("weights must be non-negative with positive sum")
        object.__setattr__(self, "weights", w)

    @property
    def needed_views(self) -> tuple[int, ...]:
        return tuple(sorted({v for pair in self.pairs for v in pair}))

    @property
    def uses_augmented(self) -> bool:
        return any(decode_view(v).graph_slot == GRAPH_AUGMENTED
                   for v in self.needed_views)

    def scales(self) -> list[str]:
        return [pair_scale(a, b) for a, b in self.pairs]


@dataclass
class _SlotTrace:
    """Cached intermediates of one (graph slot, backbone) forward pass."""

    weights: list[np.ndarray]
    # subgraph path
    adj: np.ndarray | None = None          # (B, m, m)
    x_gathered: np.ndarray | None = None   # (B*m, d) raw feature gather
    sub_masks: list[np.ndarray] = field(default_factory=list)   # relu masks per layer
    sub_inputs: list[np.ndarray] = field(default_factory=list)  # H_{l-1} stacked, l >= 2
    h_last: np.ndarray | None = None       # (B, m, h) final layer output
    # node path
    x_targets: np.ndarray | None = None    # (B, d)
    node_masks: list[np.ndarray] = field(default_factory=list)
    node_inputs: list[np.ndarray] = field(default_factory=list)
    z_last: np.ndarray | None = None       # (B, h)


@dataclass
class ForwardTrace:
    """Everything needed to reproduce the batch loss and its exact gradients."""

    params: ModelParams
    combination: CombinationConfig
    perm: np.ndarray
    batch_size: int
    views: dict[int, np.ndarray]
    slots: dict[tuple[str, int], _SlotTrace]
    pair_pos: list[np.ndarray] = field(default_factory=list)
    pair_neg: list[np.ndarray] = field(default_factory=list)
    pair_losses: list[float] = field(default_factory=list)


def _forward_slot(batch: InstanceBatch, weights: list[np.ndarray],
                  need_subgraph: bool, need_node: bool) -> tuple[dict, _SlotTrace]:
    trace = _SlotTrace(weights=weights)
    out = {}
    b, m = batch.nodes.shape
    if need_subgraph:
        trace.adj = batch.local_adj
        trace.x_gathered = batch.features[batch.nodes.reshape(-1)]
        y = (trace.x_gathered @ weights[0]).reshape(b, m, -1)
        y[:, 0, :] = 0.0  # target feature row is masked inside its own subgraph
        h = None
        for layer, w in enumerate(weights):
            if layer > 0:
                trace.sub_inputs.append(h.reshape(b * m, -1))
                y = (trace.sub_inputs[-1] @ w).reshape(b, m, -1)
            pre = np.einsum("bij,bjh->bih", trace.adj, y)
            trace.sub_masks.append(pre > 0.0)
            h = relu(pre)
        trace.h_last = h
        out[KIND_SUBGRAPH] = h.mean(axis=1)
        out[KIND_MASKED_NODE] = h[:, 0, :]
    if need_node:
        trace.x_targets = batch.features[batch.targets]
        z = trace.x_targets
        for layer, w in enumerate(weights):
            if layer > 0:
                trace.node_inputs.append(z)
            pre = z @ w
            trace.node_masks.append(pre > 0.0)
            z = relu(pre)
        trace.z_last = z
        out[KIND_NODE] = z
    return out, trace


def compute_views(batches: dict[str, InstanceBatch], params: ModelParams,
                  needed: tuple[int, ...]) -> tuple[dict[int, np.ndarray],
                                                    dict[tuple[str, int], _SlotTrace]]:
    """Evaluate exactly the requested views; returns the per-id table and the
    per-slot forward traces (slots not needed are never computed)."""
    decoded = [decode_view(v) for v in needed]
    views: dict[int, np.ndarray] = {}
    slots: dict[tuple[str, int], _SlotTrace] = {}
    for slot_key in {(v.graph_slot, v.gnn_slot) for v in decoded}:
        graph_slot, gnn_slot = slot_key
        if graph_slot not in batches:
            raise ConfigError(
                f"combination needs {graph_slot} instances but none were given")
        kinds = {v.kind for v in decoded
                 if (v.graph_slot, v.gnn_slot) == slot_key}
        out, trace = _forward_slot(
            batches[graph_slot], params.backbones[gnn_slot - 1],
            need_subgraph=bool(kinds & {KIND_SUBGRAPH, KIND_MASKED_NODE}),
            need_node=KIND_NODE in kinds)
        slots[slot_key] = trace
        for kind, value in out.items():
            vid = encode_view(graph_slot, gnn_slot, kind)
            if vid in needed:
                views[vid] = value
    return views, slots


def _check_perm(perm: np.ndarray, batch_size: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (batch_size,):
        raise DimensionError(f"permutation length {perm.shape} != batch {batch_size}")
    if np.any(perm == np.arange(batch_size)):
        raise SamplingError("negative permutation has a fixed point")
    return perm


def pair_loss(pair: tuple[int, int], views: dict[int, np.ndarray],
              perm: np.ndarray, disc: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrast loss for one pair: positives align row i of both views,
    negatives replace the smaller-id view with its permuted batch."""
    a, b = min(pair), max(pair)
    u, v = views[a], views[b]
    perm = _check_perm(perm, u.shape[0])
    y_pos = bilinear_scores_batch(u, v, disc)
    y_neg = bilinear_scores_batch(u[perm], v, disc)
    return contrast_bce(y_pos, y_neg), y_pos, y_neg


def combine_losses(losses, weights) -> float:
    if len(losses) != len(weights):
        raise DimensionError("losses and weights must align")
    return float(sum(w * l for w, l in zip(weights, losses)))


def batch_forward(batches: dict[str, InstanceBatch], params: ModelParams,
                  combination: CombinationConfig, perm: np.ndarray) -> ForwardTrace:
    """Forward pass over one batch: views, per-pair scores and the combined loss."""
    views, slots = compute_views(batches, params, combination.needed_views)
    batch_size = next(iter(views.values())).shape[0]
    trace = ForwardTrace(params=params, combination=combination,
                         perm=_check_perm(perm, batch_size),
                         batch_size=batch_size, views=views, slots=slots)
    for pair, disc in zip(combination.pairs, params.discriminators):
        loss, y_pos, y_neg = pair_loss(pair, views, trace.perm, disc)
        trace.pair_losses.append(loss)
        trace.pair_pos.append(y_pos)
        trace.pair_neg.append(y_neg)
    return trace


def total_loss(trace: ForwardTrace) -> float:
    return combine_losses(trace.pair_losses, trace.combination.weights)


def compute_gradients(trace: ForwardTrace) -> ModelGradients:
    """Exact gradients of the weighted combined loss for every parameter.

    The relu subgradient at 0 is 0; scores pushed outside the BCE clamp window
    contribute zero gradient, matching the clamped loss value exactly.
    """
    params = trace.params
    grads = ModelGradients.zeros_like(params)
    b = trace.batch_size
    d_views: dict[int, np.ndarray] = {}

    for k, (pair, disc) in enumerate(zip(trace.combination.pairs,
                                         params.discriminators)):
        w_k = trace.combination.weights[k]
        if w_k == 0.0:
            continue
        a_id, b_id = min(pair), max(pair)
        u, v = trace.views[a_id], trace.views[b_id]
        perm = trace.perm
        s_pos, s_neg = trace.pair_pos[k], trace.pair_neg[k]
        in_window = lambda s: (s > SCORE_FLOOR) & (s < 1.0 - SCORE_FLOOR)
        g_pos = np.where(in_window(s_pos), -(w_k / b) * (1.0 - s_pos), 0.0)
        g_neg = np.where(in_window(s_neg), (w_k / b) * s_neg, 0.0)

        u_perm = u[perm]
        grads.discriminators[k] += (u * g_pos[:, None]).T @ v
        grads.discriminators[k] += (u_perm * g_neg[:, None]).T @ v

        d_u = g_pos[:, None] * (v @ disc.T)
        np.add.at(d_u, perm, g_neg[:, None] * (v @ disc.T))
        d_v = g_pos[:, None] * (u @ disc) + g_neg[:, None] * (u_perm @ disc)
        for vid, dv in ((a_id, d_u), (b_id, d_v)):
            d_views[vid] = d_views.get(vid, 0.0) + dv

    for (graph_slot, gnn_slot), slot in trace.slots.items():
        target_grads = grads.backbones[gnn_slot - 1]
        sub_id = encode_view(graph_slot, gnn_slot, KIND_SUBGRAPH)
        masked_id = encode_view(graph_slot, gnn_slot, KIND_MASKED_NODE)
        node_id = encode_view(graph_slot, gnn_slot, KIND_NODE)
        n_layers = len(slot.weights)

        if slot.adj is not None and (sub_id in d_views or masked_id in d_views):
            _, m, h = slot.sub_masks[-1].shape
            d_h = np.zeros((b, m, h))
            if sub_id in d_views:
                d_h += d_views[sub_id][:, None, :] / m
            if masked_id in d_views:
                d_h[:, 0, :] += d_views[masked_id]
            for layer in range(n_layers - 1, -1, -1):
                d_pre = d_h * slot.sub_masks[layer]
                d_y = np.einsum("bij,bjh->bih", slot.adj, d_pre)
                if layer == 0:
                    d_y[:, 0, :] = 0.0  # masked feature row never feeds W
                    target_grads[0] += slot.x_gathered.T @ d_y.reshape(b * m, -1)
                else:
                    flat = d_y.reshape(b * m, -1)
                    target_grads[layer] += slot.sub_inputs[layer - 1].T @ flat
                    d_h = (flat @ slot.weights[layer].T).reshape(b, m, -1)

        if slot.x_targets is not None and node_id in d_views:
            d_z = d_views[node_id]
            for layer in range(n_layers - 1, -1, -1):
                d_pre = d_z * slot.node_masks[layer]
                if layer == 0:
                    target_grads[0] += slot.x_targets.T @ d_pre
                else:
                    target_grads[layer] += slot.node_inputs[layer - 1].T @ d_pre
                    d_z = d_pre @ slot.weights[layer].T
    return grads
