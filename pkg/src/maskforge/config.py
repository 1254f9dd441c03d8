"""Pipeline configuration: one JSON document validated as a whole.

Every stage reads its parameters from here, and every artifact embeds the
hash of the full document so `verify` can check hash chains across a run
directory. Validation errors carry the dot path of the offending field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from maskforge.core.serial import config_hash
from maskforge.errors import ConfigError, MaskforgeError
from maskforge.filtering import LINKAGES

DEFAULTS: dict = {
    "seed": 20240811,
    "out_dir": None,
    "prompt": {
        "grid_points_per_side": 14,
        "exclude_regions": [[0.5, 0.6, 1.0, 1.0]],
        "include_regions": [],
    },
    "filter": {
        "k": 50,
        "k_min": 2,
        "k_max": 100,
        "linkage": "average",
        "per_cluster_quota": 8,
        "dedup_tau": 0.995,
        "text_prompts": [
            {"text": "sky", "mode": "drop", "tau": None},
            {"text": "path", "mode": "drop", "tau": None},
            {"text": "tree", "mode": "drop", "tau": None},
        ],
    },
    "augment": {
        "profile": "limited",
        "scale_jitter": 0.0,
        "render": True,
    },
    "train": {
        "learning_rate": 0.5,
        "epochs": 500,
        "batch_size": 32,
        "lambda": 0.5,
        "l2": 1e-5,
        "finetune_lr_scale": 0.2,
        "finetune_epochs_scale": 0.34,
    },
    "deploy": {
        "size": 3000,
        "prevalence": 0.007,
    },
    "fixtures": {
        "count": 120,
        "width": 128,
        "height": 128,
        "object_count_range": [1, 3],
        "clip_probability": 0.0,
        "category_weights": None,  # None means the skewed fixture defaults
        "id_categories": ["circle_red", "square_blue", "triangle_red", "ring_blue"],
    },
    "study": {
        "trials": 5,
        "supervised_labels": 15,
        "n_targets": 5,
        "source_scenes": 120,
        "threshold": 0.5,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown field")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ConfigError(path, message)


def _validate(doc: dict) -> None:
    _require(isinstance(doc["seed"], int) and doc["seed"] >= 0, "seed",
             "must be a non-negative integer")

    prompt = doc["prompt"]
    _require(int(prompt["grid_points_per_side"]) >= 1, "prompt.grid_points_per_side",
             "must be >= 1")
    for kind in ("exclude_regions", "include_regions"):
        for i, region in enumerate(prompt[kind]):
            ok = (len(region) == 4 and 0 <= region[0] < region[2] <= 1
                  and 0 <= region[1] < region[3] <= 1)
            _require(ok, f"prompt.{kind}[{i}]", "must be [x0, y0, x1, y1] in [0, 1]")

    filt = doc["filter"]
    k = filt["k"]
    _require(k == "auto" or (isinstance(k, int) and k >= 1), "filter.k",
             "must be a positive integer or 'auto'")
    _require(filt["linkage"] in LINKAGES, "filter.linkage", f"must be one of {LINKAGES}")
    quota = filt["per_cluster_quota"]
    _require(quota is None or (isinstance(quota, int) and quota >= 1),
             "filter.per_cluster_quota", "must be >= 1 or null")
    tau = filt["dedup_tau"]
    _require(tau is None or -1.0 <= float(tau) <= 1.0, "filter.dedup_tau",
             "must be in [-1, 1] or null")
    for i, p in enumerate(filt["text_prompts"]):
        _require(p.get("mode") in ("drop", "keep"), f"filter.text_prompts[{i}].mode",
                 "must be drop or keep")
        ptau = p.get("tau")
        _require(ptau is None or -1.0 <= float(ptau) <= 1.0,
                 f"filter.text_prompts[{i}].tau", "must be in [-1, 1] or null")

    aug = doc["augment"]
    _require(aug["profile"] in ("limited", "heavy"), "augment.profile",
             "must be limited or heavy")
    _require(float(aug["scale_jitter"]) >= 0, "augment.scale_jitter", "must be >= 0")

    train = doc["train"]
    _require(float(train["learning_rate"]) > 0, "train.learning_rate", "must be > 0")
    _require(int(train["epochs"]) >= 1, "train.epochs", "must be >= 1")
    _require(int(train["batch_size"]) >= 1, "train.batch_size", "must be >= 1")
    _require(0.0 <= float(train["lambda"]) <= 1.0, "train.lambda", "must be in [0, 1]")
    _require(float(train["l2"]) >= 0, "train.l2", "must be >= 0")
    _require(float(train["finetune_lr_scale"]) > 0, "train.finetune_lr_scale", "must be > 0")
    _require(float(train["finetune_epochs_scale"]) > 0, "train.finetune_epochs_scale",
             "must be > 0")

    deploy = doc["deploy"]
    _require(int(deploy["size"]) >= 1, "deploy.size", "must be >= 1")
    p = float(deploy["prevalence"])
    _require(0.0 < p < 1.0, "deploy.prevalence", "must be in (0, 1)")
    _require(int(p * int(deploy["size"])) >= 1, "deploy.prevalence",
             "floor(prevalence * size) must be >= 1")

    fx = doc["fixtures"]
    _require(int(fx["count"]) >= 1, "fixtures.count", "must be >= 1")
    _require(int(fx["width"]) >= 48 and int(fx["height"]) >= 48, "fixtures.width",
             "dimensions must be >= 48")
    oc = fx["object_count_range"]
    _require(len(oc) == 2 and 0 <= int(oc[0]) <= int(oc[1]), "fixtures.object_count_range",
             "must be [min, max] with 0 <= min <= max")
    _require(0.0 <= float(fx["clip_probability"]) <= 1.0, "fixtures.clip_probability",
             "must be in [0, 1]")

    study = doc["study"]
    _require(int(study["trials"]) >= 1, "study.trials", "must be >= 1")
    _require(int(study["supervised_labels"]) >= 2, "study.supervised_labels", "must be >= 2")
    _require(int(study["n_targets"]) >= 1, "study.n_targets", "must be >= 1")
    _require(int(study["source_scenes"]) >= 1, "study.source_scenes", "must be >= 1")
    _require(0.0 <= float(study["threshold"]) <= 1.0, "study.threshold", "must be in [0, 1]")


@dataclass
class PipelineConfig:
    doc: dict

    @classmethod
    def from_doc(cls, user_doc: dict) -> "PipelineConfig":
        doc = _merge(DEFAULTS, user_doc)
        _validate(doc)
        return cls(doc=doc)

    @classmethod
    def load(cls, path: str | Path | None, overrides: dict | None = None) -> "PipelineConfig":
        user_doc: dict = {}
        if path is not None:
            try:
                user_doc = json.loads(Path(path).read_text())
            except FileNotFoundError:
                raise ConfigError("config", f"config file not found: {path}")
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"invalid JSON: {exc}")
        doc = _merge(DEFAULTS, user_doc)
        for dot_path, value in (overrides or {}).items():
            _apply_override(doc, dot_path, value)
        _validate(doc)
        return cls(doc=doc)

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    def hash(self) -> str:
        return config_hash(self.doc)

    def scene_config(self, clip_probability: float | None = None, seed: int | None = None):
        from maskforge import fixtures as fx

        section = self.doc["fixtures"]
        weights = section["category_weights"]
        return fx.SceneConfig(
            width=int(section["width"]),
            height=int(section["height"]),
            object_count_range=tuple(int(v) for v in section["object_count_range"]),
            category_weights=(
                {str(k): float(v) for k, v in weights.items()}
                if weights else fx.default_category_weights()
            ),
            clip_probability=(
                float(section["clip_probability"]) if clip_probability is None
                else clip_probability
            ),
            id_categories=tuple(section["id_categories"]),
            ood_categories=tuple(
                c for c in fx.SPRITE_CATEGORIES if c not in section["id_categories"]
            ),
            seed=self.seed if seed is None else seed,
        )

    def prompt_spec(self):
        from maskforge.segmentation import PromptSpec

        return PromptSpec.from_json(self.doc["prompt"])

    def train_config(self, lam: float | None = None, seed: int | None = None):
        from maskforge.probe import TrainConfig

        section = dict(self.doc["train"])
        if lam is not None:
            section["lambda"] = lam
        if seed is not None:
            section["seed"] = seed
        return TrainConfig.from_json(section)

    def finetune_config(self, seed: int):
        from maskforge.probe import TrainConfig

        section = self.doc["train"]
        return TrainConfig(
            learning_rate=float(section["learning_rate"]) * float(section["finetune_lr_scale"]),
            epochs=max(1, int(int(section["epochs"]) * float(section["finetune_epochs_scale"]))),
            batch_size=int(section["batch_size"]),
            lam=0.0,
            seed=seed,
            l2=float(section["l2"]),
        )

    def deployment_config(self, seed: int):
        from maskforge.dataset import DeploymentConfig

        return DeploymentConfig(
            size=int(self.doc["deploy"]["size"]),
            prevalence=float(self.doc["deploy"]["prevalence"]),
            seed=seed,
        )

    def aug_profile(self):
        from maskforge.augmentation import PROFILES, AugProfile

        base = PROFILES[self.doc["augment"]["profile"]]
        jitter = float(self.doc["augment"]["scale_jitter"])
        if jitter > 0:
            return AugProfile(base.name, base.rotation_range_deg, base.hflip_prob, jitter)
        return base


def _apply_override(doc: dict, dot_path: str, value: object) -> None:
    parts = dot_path.split(".")
    node = doc
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(".".join(parts[: i + 1]), "unknown field")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(dot_path, "unknown field")
    node[leaf] = value


def parse_override_value(raw: str) -> object:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw
