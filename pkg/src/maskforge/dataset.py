"""Dataset assembly: manifests, stratified splits, low-prevalence deployment sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from maskforge.augmentation import AugmentedSample
from maskforge.core.manifest import NEGATIVE, POSITIVE, DatasetManifest, SampleEntry
from maskforge.core.seeding import rng_for
from maskforge.core.serial import save_png
from maskforge.errors import CapacityError, ParameterError, ValidationError


@dataclass(frozen=True)
class DeploymentConfig:
    size: int
    prevalence: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.prevalence < 1.0:
            raise ValidationError(f"prevalence must be in (0, 1), got {self.prevalence}")
        if math.floor(self.prevalence * self.size) < 1:
            raise ValidationError(
                f"floor(p*N) = {math.floor(self.prevalence * self.size)} < 1 "
                f"for N={self.size}, p={self.prevalence}"
            )

    @property
    def positive_count(self) -> int:
        return math.floor(self.prevalence * self.size)

    def to_json(self) -> dict:
        return {"size": self.size, "prevalence": self.prevalence, "seed": self.seed}


def emit_dataset(
    samples: Sequence[AugmentedSample],
    out_dir: str | Path,
    config_hash: str = "",
    write_images: bool = True,
) -> DatasetManifest:
    """Write sample PNGs and manifest.json; manifest order is sample-id order."""
    if not samples:
        raise ParameterError("refusing to emit an empty dataset")
    out_dir = Path(out_dir)
    entries = []
    for sample in sorted(samples, key=lambda s: s.sample_id):
        image_path = f"images/{sample.sample_id}.png"
        if write_images:
            if sample.image is None:
                raise ParameterError(f"sample {sample.sample_id} has no rendered image")
            try:
                save_png(out_dir / image_path, sample.image)
            except OSError as exc:
                raise OSError(f"while writing sample {sample.sample_id}: {exc}") from exc
        entries.append(
            SampleEntry(
                sample_id=sample.sample_id,
                image_path=image_path,
                class_name=sample.class_name,
                provenance=sample.provenance,
            )
        )
    positives = sum(1 for e in entries if e.class_name == POSITIVE)
    manifest = DatasetManifest(
        samples=entries,
        splits={},
        prevalence=positives / len(entries),
        config_hash=config_hash,
    )
    manifest.validate()
    manifest.save(out_dir / "manifest.json")
    return manifest


def make_deployment_set(
    pos_pool: Sequence[SampleEntry],
    neg_pool: Sequence[SampleEntry],
    config: DeploymentConfig,
) -> DatasetManifest:
    """Exactly floor(p*N) positives sampled without replacement, order shuffled."""
    n_pos = config.positive_count
    n_neg = config.size - n_pos
    if len(pos_pool) < n_pos:
        raise CapacityError(
            f"positive pool has {len(pos_pool)}, need {n_pos} "
            f"(deficit {n_pos - len(pos_pool)})"
        )
    if len(neg_pool) < n_neg:
        raise CapacityError(
            f"negative pool has {len(neg_pool)}, need {n_neg} "
            f"(deficit {n_neg - len(neg_pool)})"
        )
    pos_sorted = sorted(pos_pool, key=lambda e: e.sample_id)
    neg_sorted = sorted(neg_pool, key=lambda e: e.sample_id)
    rng = rng_for(config.seed, "deployment")
    chosen_pos = [pos_sorted[i] for i in sorted(rng.choice(len(pos_sorted), n_pos, replace=False))]
    chosen_neg = [neg_sorted[i] for i in sorted(rng.choice(len(neg_sorted), n_neg, replace=False))]
    combined = chosen_pos + chosen_neg
    order = rng_for(config.seed, "deployment-order").permutation(len(combined))
    samples = [combined[i] for i in order]
    manifest = DatasetManifest(
        samples=samples,
        splits={},
        prevalence=n_pos / config.size,
    )
    manifest.validate()
    return manifest


def split(
    manifest: DatasetManifest,
    ratios: Sequence[float],
    seed: int,
    names: Sequence[str] | None = None,
) -> DatasetManifest:
    """Stratified-by-class disjoint splits; per-class counts within 1 of exact."""
    ratios = [float(r) for r in ratios]
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ParameterError(f"ratios must sum to 1, got {sum(ratios)}")
    if any(r < 0 for r in ratios):
        raise ParameterError("ratios must be non-negative")
    if names is None:
        names = [f"split{i}" for i in range(len(ratios))]
    if len(names) != len(ratios):
        raise ParameterError("names and ratios length mismatch")

    assignments: dict[str, list[str]] = {name: [] for name in names}
    for class_name in (POSITIVE, NEGATIVE):
        ids = sorted(e.sample_id for e in manifest.samples if e.class_name == class_name)
        if not ids:
            continue
        rng = rng_for(seed, "split", class_name)
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        counts = [math.floor(r * len(ids)) for r in ratios]
        remainder = len(ids) - sum(counts)
        fractions = sorted(
            range(len(ratios)),
            key=lambda i: (-(ratios[i] * len(ids) - counts[i]), i),
        )
        for i in fractions[:remainder]:
            counts[i] += 1
        for count, name, ratio in zip(counts, names, ratios):
            if ratio > 0 and count == 0:
                raise ValidationError(
                    f"split {name!r} would receive zero {class_name} samples"
                )
        cursor = 0
        for count, name in zip(counts, names):
            assignments[name].extend(shuffled[cursor : cursor + count])
            cursor += count

    out = DatasetManifest(
        samples=list(manifest.samples),
        splits={name: sorted(ids) for name, ids in assignments.items()},
        prevalence=manifest.prevalence,
        config_hash=manifest.config_hash,
    )
    out.validate()
    return out
