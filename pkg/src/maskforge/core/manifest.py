"""Dataset manifest: ordered sample list with splits, prevalence, and config hash."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from maskforge.errors import FormatError, ValidationError

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class SampleEntry:
    """One manifest row. ``provenance`` is an arbitrary JSON-safe mapping."""

    sample_id: str
    image_path: str
    class_name: str
    provenance: dict

    def __post_init__(self) -> None:
        if self.class_name not in (POSITIVE, NEGATIVE):
            raise ValidationError(
                f"sample {self.sample_id}: class must be positive or negative, "
                f"got {self.class_name!r}"
            )

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "class": self.class_name,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SampleEntry":
        return cls(
            sample_id=str(doc["sample_id"]),
            image_path=str(doc["image_path"]),
            class_name=str(doc["class"]),
            provenance=dict(doc.get("provenance", {})),
        )


@dataclass
class DatasetManifest:
    samples: list[SampleEntry]
    splits: dict[str, list[str]] = field(default_factory=dict)
    prevalence: float = 0.0
    config_hash: str = ""

    def validate(self) -> None:
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate sample ids in manifest")
        known = set(ids)
        seen: set[str] = set()
        for name, members in self.splits.items():
            for sid in members:
                if sid not in known:
                    raise ValidationError(f"split {name!r} references unknown sample {sid}")
                if sid in seen:
                    raise ValidationError(f"sample {sid} appears in more than one split")
                seen.add(sid)
        positives = sum(1 for s in self.samples if s.class_name == POSITIVE)
        expected = positives / len(self.samples) if self.samples else 0.0
        if self.samples and self.prevalence != expected:
            raise ValidationError(
                f"prevalence {self.prevalence} != positives/total {expected}"
            )

    @property
    def positives(self) -> int:
        return sum(1 for s in self.samples if s.class_name == POSITIVE)

    def to_json(self) -> dict:
        return {
            "samples": [s.to_json() for s in self.samples],
            "splits": {k: list(v) for k, v in self.splits.items()},
            "prevalence": self.prevalence,
            "config_hash": self.config_hash,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DatasetManifest":
        try:
            return cls(
                samples=[SampleEntry.from_json(s) for s in doc["samples"]],
                splits={str(k): [str(x) for x in v] for k, v in doc.get("splits", {}).items()},
                prevalence=float(doc["prevalence"]),
                config_hash=str(doc.get("config_hash", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad manifest document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))
