"""Run configuration: JSON schema, named combination presets and loading."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema

from .augmentation import AugmentationSpec
from .contrast import CombinationConfig
from .errors import ConfigError
from .injection import InjectionSpec
from .trainer import TrainConfig

# named combinations of the view pool; weights follow pair list order and the
# only published balance pair (0.3, 0.7) is applied to every two-pair preset
PRESETS: dict[str, tuple[list[tuple[int, int]], list[float]]] = {
    "cola": ([(1, 3)], [1.0]),
    "anemone": ([(1, 3), (5, 6)], [0.3, 0.7]),
    "gradate": ([(1, 3), (7, 9), (2, 3), (8, 9), (1, 7)], [0.2] * 5),
    "l-mag": ([(4, 9)], [1.0]),
    "m-mag": ([(1, 3), (4, 6)], [0.3, 0.7]),
    "m-s": ([(1, 3), (2, 3)], [0.3, 0.7]),
    "m-sg": ([(1, 3), (5, 6)], [0.3, 0.7]),
    "m-g": ([(1, 3), (4, 6)], [0.3, 0.7]),
}

DEFAULT_AUGMENTATION = [{"op": "mask_features", "p": 0.2},
                        {"op": "remove_edges", "p": 0.2}]

_STEP_SCHEMA = {
    "type": "object",
    "properties": {
        "op": {"enum": ["mask_features", "remove_edges", "flip_edges",
                        "ppr", "heat"]},
        "p": {"type": "number", "minimum": 0, "maximum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "t": {"type": "number", "exclusiveMinimum": 0},
        "keep_eps": {"type": "number", "minimum": 0},
    },
    "required": ["op"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "dataset": {
            "type": "object",
            "properties": {
                "edges": {"type": "string"},
                "features": {"type": "string"},
                "labels": {"type": ["string", "null"]},
                "name": {"type": "string"},
            },
            "required": ["edges", "features"],
            "additionalProperties": False,
        },
        "output_dir": {"type": "string"},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0},
                  "minItems": 1},
        "injection": {
            "type": "object",
            "properties": {
                "num_cliques": {"type": "integer", "minimum": 1},
                "clique_size": {"type": "integer", "minimum": 2},
                "contextual_count": {"type": "integer", "minimum": 1},
                "candidate_pool": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "train": {
            "type": "object",
            "properties": {
                "preset": {"enum": sorted(PRESETS)},
                "combination": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "array", "minItems": 2, "maxItems": 2,
                              "items": {"type": "integer", "minimum": 1,
                                        "maximum": 12}},
                },
                "weights": {"type": "array",
                            "items": {"type": "number", "minimum": 0}},
                "epochs": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "hidden_dim": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 2},
                "subgraph_size": {"type": "integer", "minimum": 1},
                "restart_p": {"type": "number", "exclusiveMinimum": 0,
                              "maximum": 1},
                "gcn_layers": {"type": "integer", "minimum": 1},
                "augmentation": {"type": "array", "items": _STEP_SCHEMA},
                "per_node_mask": {"type": "boolean"},
                "binarize_diffusion": {"type": "boolean"},
                "normalize_features": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "scoring": {
            "type": "object",
            "properties": {
                "rounds": {"type": "integer", "minimum": 1},
                "refresh_augmentation": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["dataset"],
    "additionalProperties": False,
}

DEFAULT_SEEDS = [0, 1, 2, 3, 4]
DEFAULT_ROUNDS = 256
LARGE_NODE_THRESHOLD = 10_000


@dataclass(frozen=True)
class RunConfig:
    dataset_edges: str
    dataset_features: str
    dataset_labels: str | None
    dataset_name: str | None
    output_dir: str
    seeds: tuple[int, ...]
    injection: InjectionSpec
    train: TrainConfig
    rounds: int
    refresh_augmentation: bool
    raw: dict

    def train_for_seed(self, seed: int) -> TrainConfig:
        return replace(self.train, seed=seed)


def _train_config_from_dict(train_dict: dict, seed: int) -> TrainConfig:
    pairs = [tuple(p) for p in train_dict["combination"]]
    combination = CombinationConfig(pairs=tuple(pairs),
                                    weights=tuple(train_dict["weights"]))
    aug = train_dict.get("augmentation")
    spec = None
    if aug is not None:
        if isinstance(aug, dict):  # config echo round-trip
            spec = AugmentationSpec.from_dicts(aug["steps"], seed=aug["seed"],
                                               per_node_mask=aug["per_node_mask"],
                                               binarize_diffusion=aug["binarize_diffusion"])
        else:
            spec = AugmentationSpec.from_dicts(
                aug, seed=seed,
                per_node_mask=train_dict.get("per_node_mask", False),
                binarize_diffusion=train_dict.get("binarize_diffusion", True))
    return TrainConfig(
        combination=combination,
        epochs=train_dict.get("epochs", 100),
        lr=train_dict.get("lr", 1e-3),
        hidden_dim=train_dict.get("hidden_dim", 64),
        batch_size=train_dict.get("batch_size", 300),
        subgraph_size=train_dict.get("subgraph_size", 4),
        restart_p=train_dict.get("restart_p", 0.5),
        gcn_layers=train_dict.get("gcn_layers", 1),
        augmentation=spec,
        normalize_features=train_dict.get("normalize_features", True),
        seed=seed)


def resolve_combination(train_dict: dict) -> dict:
    """Expand a preset name into explicit pairs/weights, or validate them."""
    out = dict(train_dict)
    preset = out.pop("preset", None)
    if preset is not None:
        if "combination" in out or "weights" in out:
            raise ConfigError("give either a preset or explicit combination, not both")
        pairs, weights = PRESETS[preset]
        out["combination"] = [list(p) for p in pairs]
        out["weights"] = list(weights)
    if "combination" not in out:
        raise ConfigError("train section needs a preset or a combination")
    if "weights" not in out:
        out["weights"] = [1.0] * len(out["combination"])
    if len(out["weights"]) != len(out["combination"]):
        raise ConfigError("weights and combination lengths differ")
    combo = CombinationConfig(pairs=tuple(tuple(p) for p in out["combination"]),
                              weights=tuple(out["weights"]))
    # an explicitly empty augmentation list is a contradiction the TrainConfig
    # validator rejects; the default only fills in when the key is absent
    if combo.uses_augmented and "augmentation" not in out:
        out["augmentation"] = list(DEFAULT_AUGMENTATION)
    return out


def load_config(path) -> RunConfig:
    """Parse and fully validate a run-config JSON document."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message} (at {where})") from exc

    dataset = raw["dataset"]
    base = Path(path).parent

    def _resolve(p):
        return str((base / p) if not Path(p).is_absolute() else Path(p))

    inj = raw.get("injection", {})
    injection = InjectionSpec(
        clique_size=inj.get("clique_size", 15),
        num_cliques=inj.get("num_cliques", 5),
        contextual_count=inj.get("contextual_count",
                                 inj.get("num_cliques", 5) * inj.get("clique_size", 15)),
        candidate_pool=inj.get("candidate_pool", 50),
        seed=inj.get("seed", 0))

    train_dict = resolve_combination(raw.get("train", {"preset": "cola"}))
    seeds = tuple(raw.get("seeds", DEFAULT_SEEDS))
    train = _train_config_from_dict(train_dict, seed=seeds[0])

    scoring = raw.get("scoring", {})
    return RunConfig(
        dataset_edges=_resolve(dataset["edges"]),
        dataset_features=_resolve(dataset["features"]),
        dataset_labels=(_resolve(dataset["labels"])
                        if dataset.get("labels") else None),
        dataset_name=dataset.get("name"),
        output_dir=raw.get("output_dir", "out"),
        seeds=seeds,
        injection=injection,
        train=train,
        rounds=scoring.get("rounds", DEFAULT_ROUNDS),
        refresh_augmentation=scoring.get("refresh_augmentation", True),
        raw=raw)
