"""Shared finite-difference gradient-check harness.

Builds a random small training batch (optionally with an augmented slot and
stacked GCN layers), computes analytic gradients for the combined loss and
compares every parameter entry against central differences.
"""
import numpy as np

from gcad.augmentation import AugmentationSpec, Augmenter
from gcad.contrast import (CombinationConfig, batch_forward, compute_gradients,
                           total_loss)
from gcad.nn import init_params
from gcad.sampling import SubgraphSampler
from gcad.synthetic import make_synthetic_graph

FD_EPS = 1e-5
REL_TOL = 1e-4


def build_case(seed, pairs, weights, layers=1, n=40, d=9, h=5,
               batch=6, m=3):
    rng = np.random.default_rng(seed)
    g = make_synthetic_graph(n=n, d=d, communities=3, seed=seed)
    combo = CombinationConfig(pairs=pairs, weights=weights)
    targets = rng.choice(n, batch, replace=False)
    batches = {"original": SubgraphSampler(g, m, 0.5).instances(targets, rng)}
    if combo.uses_augmented:
        augmenter = Augmenter(AugmentationSpec.from_dicts(
            [{"op": "mask_features", "p": 0.3},
             {"op": "remove_edges", "p": 0.3}]))
        aug = augmenter.refresh(g, rng)
        batches["augmented"] = SubgraphSampler(aug, m, 0.5).instances(targets, rng)
    params = init_params(d, h, len(combo.pairs), rng, num_layers=layers)
    shift = int(rng.integers(1, batch))
    perm = (np.arange(batch) + shift) % batch
    return batches, params, combo, perm


def worst_relative_error(batches, params, combo, perm) -> float:
    trace = batch_forward(batches, params, combo, perm)
    grads = compute_gradients(trace)

    def loss_now():
        return total_loss(batch_forward(batches, params, combo, perm))

    worst = 0.0
    for p, g in zip(params.flat(), grads.flat()):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + FD_EPS
            up = loss_now()
            p[idx] = orig - FD_EPS
            down = loss_now()
            p[idx] = orig
            fd = (up - down) / (2.0 * FD_EPS)
            worst = max(worst, abs(g[idx] - fd) / max(1.0, abs(fd)))
    return worst
