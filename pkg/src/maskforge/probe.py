"""Logistic probe over provider embeddings.

Implements the training protocols compared in the study: supervised
fine-tuning on labeled data only, the surrogate-objective-only regime,
sequential pre-train then fine-tune, and simultaneous multi-task training
with the mixing weight lambda:

    L = lambda * L_w + (1 - lambda) * L_t + l2 * ||w||^2

where L_w is the binary cross-entropy on the weak (augmented) batch and L_t
on the labeled target batch.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from maskforge.core.seeding import rng_for
from maskforge.core.serial import config_hash
from maskforge.errors import ParameterError, ValidationError


@dataclass
class ProbeModel:
    weights: np.ndarray
    bias: float

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise ValidationError("probe parameters must be finite")

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def zeros(cls, dim: int) -> "ProbeModel":
        return cls(weights=np.zeros(dim), bias=0.0)

    def copy(self) -> "ProbeModel":
        return ProbeModel(weights=self.weights.copy(), bias=self.bias)

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        doc = {
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "bias": self.bias,
        }
        if extra:
            doc.update(extra)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ProbeModel":
        doc = json.loads(Path(path).read_text())
        model = cls(weights=np.array(doc["weights"]), bias=float(doc["bias"]))
        if model.dim != int(doc["dim"]):
            raise ValidationError("model dim field disagrees with weight count")
        return model


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 300
    batch_size: int = 32
    lam: float = 0.5
    seed: int = 0
    l2: float = 1e-4

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lambda must be in [0, 1], got {self.lam}")
        if self.l2 < 0:
            raise ParameterError("l2 must be >= 0")

    def to_json(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lambda": self.lam,
            "seed": self.seed,
            "l2": self.l2,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        return cls(
            learning_rate=float(doc.get("learning_rate", 0.1)),
            epochs=int(doc.get("epochs", 300)),
            batch_size=int(doc.get("batch_size", 32)),
            lam=float(doc.get("lambda", 0.5)),
            seed=int(doc.get("seed", 0)),
            l2=float(doc.get("l2", 1e-4)),
        )


@dataclass
class Batch:
    """Feature matrix (N, D) float64 with 0/1 labels (N,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ParameterError(
                f"bad batch shapes {self.features.shape} vs {self.labels.shape}"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @classmethod
    def empty(cls, dim: int) -> "Batch":
        return cls(features=np.zeros((0, dim)), labels=np.zeros(0))

    def take(self, indices: np.ndarray) -> "Batch":
        return Batch(features=self.features[indices], labels=self.labels[indices])


@dataclass
class LossTerms:
    weak: float
    target: float

    def __post_init__(self) -> None:
        if self.weak < 0 or self.target < 0:
            raise ValidationError("loss terms must be non-negative")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict(model: ProbeModel, embedding: np.ndarray) -> float:
    """Positive-class score sigmoid(w.x + b) in (0, 1)."""
    x = np.asarray(embedding, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ParameterError(f"embedding shape {x.shape} != ({model.dim},)")
    return float(_sigmoid(np.array([model.weights @ x + model.bias]))[0])


def predict_batch(model: ProbeModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != model.dim:
        raise ParameterError(f"feature dim {features.shape[1]} != {model.dim}")
    return _sigmoid(features @ model.weights + model.bias)


def _bce_terms(model: ProbeModel, batch: Batch) -> tuple[float, np.ndarray, float]:
    """(mean BCE, grad_w, grad_b) for one batch; zeros for an empty batch."""
    n = len(batch)
    if n == 0:
        return 0.0, np.zeros(model.dim), 0.0
    z = batch.features @ model.weights + model.bias
    p = _sigmoid(z)
    eps = 1e-12
    loss = float(-np.mean(batch.labels * np.log(p + eps)
                          + (1 - batch.labels) * np.log(1 - p + eps)))
    residual = p - batch.labels
    grad_w = batch.features.T @ residual / n
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def loss_and_grad(
    model: ProbeModel,
    batch_w: Batch,
    batch_t: Batch,
    lam: float,
    l2: float = 0.0,
) -> tuple[float, LossTerms, np.ndarray, float]:
    """Weighted loss lambda*L_w + (1-lambda)*L_t + l2*||w||^2 and its exact gradient."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must be in [0, 1], got {lam}")
    if len(batch_w) == 0 and len(batch_t) == 0:
        raise ParameterError("both batches are empty")
    loss_w, gw_w, gb_w = _bce_terms(model, batch_w)
    loss_t, gw_t, gb_t = _bce_terms(model, batch_t)
    total = lam * loss_w + (1 - lam) * loss_t + l2 * float(model.weights @ model.weights)
    grad_w = lam * gw_w + (1 - lam) * gw_t + 2 * l2 * model.weights
    grad_b = lam * gb_w + (1 - lam) * gb_t
    return total, LossTerms(weak=loss_w, target=loss_t), grad_w, grad_b


@dataclass
class TrainTrace:
    epochs: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    loss_weak: list[float] = field(default_factory=list)
    loss_target: list[float] = field(default_factory=list)

    def append(self, epoch: int, total: float, terms: LossTerms) -> None:
        self.epochs.append(epoch)
        self.loss.append(total)
        self.loss_weak.append(terms.weak)
        self.loss_target.append(terms.target)

    def save_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "loss_weak", "loss_target"])
            for row in zip(self.epochs, self.loss, self.loss_weak, self.loss_target):
                writer.writerow(row)


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    if n == 0:
        return []
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train(
    train_w: Batch,
    train_t: Batch,
    config: TrainConfig,
) -> tuple[ProbeModel, TrainTrace]:
    """Mini-batch gradient descent from zero init; deterministic given seed."""
    if config.lam == 1.0 and len(train_w) == 0:
        raise ParameterError("lambda=1 with an empty weak set has no learnable signal")
    if config.lam == 0.0 and len(train_t) == 0:
        raise ParameterError("lambda=0 with an empty target set has no learnable signal")
    if len(train_w) == 0 and len(train_t) == 0:
        raise ParameterError("no training data")
    dim = train_w.features.shape[1] if len(train_w) else train_t.features.shape[1]
    model = ProbeModel.zeros(dim)
    trace = TrainTrace()
    for epoch in range(config.epochs):
        rng = rng_for(config.seed, "epoch", epoch)
        batches_w = _epoch_batches(len(train_w), config.batch_size, rng)
        batches_t = _epoch_batches(len(train_t), config.batch_size, rng)
        steps = max(len(batches_w), len(batches_t))
        for step in range(steps):
            bw = train_w.take(batches_w[step % len(batches_w)]) if batches_w else Batch.empty(dim)
            bt = train_t.take(batches_t[step % len(batches_t)]) if batches_t else Batch.empty(dim)
            _, _, grad_w, grad_b = loss_and_grad(model, bw, bt, config.lam, config.l2)
            model.weights = model.weights - config.learning_rate * grad_w
            model.bias = model.bias - config.learning_rate * grad_b
        total, terms, _, _ = loss_and_grad(model, train_w, train_t, config.lam, config.l2)
        if not np.isfinite(total):
            raise ValidationError(f"training diverged at epoch {epoch}")
        trace.append(epoch, total, terms)
    return model, trace


def pretrain_then_finetune(
    weak_set: Batch,
    labeled_set: Batch,
    cfg_pre: TrainConfig,
    cfg_ft: TrainConfig,
) -> tuple[ProbeModel, TrainTrace, TrainTrace]:
    """Phase 1: weak objective only. Phase 2: continue on labeled data only."""
    if len(weak_set) == 0:
        raise ParameterError("weak set must be non-empty for pre-training")
    dim = weak_set.features.shape[1]
    pre_cfg = TrainConfig(
        learning_rate=cfg_pre.learning_rate,
        epochs=cfg_pre.epochs,
        batch_size=cfg_pre.batch_size,
        lam=1.0,
        seed=cfg_pre.seed,
        l2=cfg_pre.l2,
    )
    model, trace_pre = train(weak_set, Batch.empty(dim), pre_cfg)
    if len(labeled_set) == 0:
        return model, trace_pre, TrainTrace()
    trace_ft = TrainTrace()
    for epoch in range(cfg_ft.epochs):
        rng = rng_for(cfg_ft.seed, "finetune-epoch", epoch)
        batches = _epoch_batches(len(labeled_set), cfg_ft.batch_size, rng)
        for indices in batches:
            bt = labeled_set.take(indices)
            _, _, grad_w, grad_b = loss_and_grad(model, Batch.empty(dim), bt, 0.0, cfg_ft.l2)
            model.weights = model.weights - cfg_ft.learning_rate * grad_w
            model.bias = model.bias - cfg_ft.learning_rate * grad_b
        total, terms, _, _ = loss_and_grad(model, Batch.empty(dim), labeled_set, 0.0, cfg_ft.l2)
        if not np.isfinite(total):
            raise ValidationError(f"fine-tuning diverged at epoch {epoch}")
        trace_ft.append(epoch, total, terms)
    return model, trace_pre, trace_ft
