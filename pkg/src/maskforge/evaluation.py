"""Metrics and evaluation reports for imbalanced binary classification.

Zero-denominator conventions are pessimistic: precision, recall, and F1 all
fall to 0 when undefined, which is the conservative choice in low-prevalence
deployment settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from maskforge.errors import ParameterError, ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(
    scores: Sequence[float], labels: Sequence[int], threshold: float
) -> ConfusionMatrix:
    """Counts with predicted-positive iff score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.size == 0:
        raise ParameterError(f"scores/labels shape mismatch or empty: {scores.shape} vs {labels.shape}")
    predicted = scores >= threshold
    actual = labels == 1
    return ConfusionMatrix(
        tp=int((predicted & actual).sum()),
        fp=int((predicted & ~actual).sum()),
        fn=int((~predicted & actual).sum()),
        tn=int((~predicted & ~actual).sum()),
    )


def precision(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fp
    return cm.tp / denom if denom else 0.0


def recall(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else 0.0


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    return 2 * p * r / (p + r) if p + r else 0.0


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    tpr = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    tnr = cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp else 0.0
    return (tpr + tnr) / 2


@dataclass
class EvalReport:
    threshold: float
    counts: ConfusionMatrix
    dataset_hash: str = ""

    @property
    def metrics(self) -> dict[str, float]:
        return {
            "precision": precision(self.counts),
            "recall": recall(self.counts),
            "f1": f1(self.counts),
            "balanced_accuracy": balanced_accuracy(self.counts),
        }

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "counts": self.counts.to_json(),
            "metrics": self.metrics,
            "dataset_hash": self.dataset_hash,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EvalReport":
        counts = ConfusionMatrix(**doc["counts"])
        return cls(
            threshold=float(doc["threshold"]),
            counts=counts,
            dataset_hash=str(doc.get("dataset_hash", "")),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n")


def evaluate(
    scores: Sequence[float],
    labels: Sequence[int],
    threshold: float = 0.5,
    dataset_hash: str = "",
) -> EvalReport:
    return EvalReport(
        threshold=threshold,
        counts=confusion(scores, labels, threshold),
        dataset_hash=dataset_hash,
    )


def threshold_sweep(
    scores: Sequence[float],
    labels: Sequence[int],
    grid: Sequence[float],
) -> list[tuple[float, EvalReport]]:
    """One report per threshold over a sorted grid."""
    grid = list(grid)
    if not grid:
        raise ParameterError("threshold grid is empty")
    if grid != sorted(grid):
        raise ParameterError("threshold grid must be sorted ascending")
    return [(t, evaluate(scores, labels, threshold=t)) for t in grid]
