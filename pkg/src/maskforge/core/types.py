"""Frames, mask records, and the masks.jsonl interchange format.

Mask records carry their frame dimensions so a masks.jsonl file validates on
its own, without the frames that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from maskforge.core.rle import mask_stats, rle_decode, rle_encode
from maskforge.errors import FormatError, ValidationError


@dataclass(frozen=True)
class FrameSource:
    video_id: str
    timestamp_ms: int


@dataclass(frozen=True, eq=False)
class Frame:
    """A single RGB frame. ``pixels`` is an (H, W, 3) uint8 buffer, row-major."""

    id: str
    width: int
    height: int
    pixels: np.ndarray
    source: FrameSource | None = None

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValidationError(
                f"frame {self.id}: pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        if self.pixels.dtype != np.uint8:
            raise ValidationError(f"frame {self.id}: pixels must be uint8")


@dataclass(frozen=True)
class MaskRecord:
    """A binary segmentation region stored as alternating RLE counts."""

    id: str
    frame_id: str
    width: int
    height: int
    rle: tuple[int, ...]
    bbox: tuple[int, int, int, int]
    area: int
    label: str | None = None

    @classmethod
    def from_bitmap(
        cls,
        mask_id: str,
        frame_id: str,
        bitmap: np.ndarray,
        label: str | None = None,
    ) -> "MaskRecord":
        area, bbox = mask_stats(bitmap)
        height, width = bitmap.shape
        return cls(
            id=mask_id,
            frame_id=frame_id,
            width=width,
            height=height,
            rle=tuple(rle_encode(bitmap)),
            bbox=bbox,
            area=area,
            label=label,
        )

    def decode(self) -> np.ndarray:
        """Decode the RLE back into a boolean (H, W) bitmap."""
        return rle_decode(list(self.rle), self.width, self.height)

    def validate(self) -> None:
        """Re-check every invariant against the decoded bitmap."""
        if self.area < 1:
            raise ValidationError(f"mask {self.id}: area must be >= 1, got {self.area}")
        bitmap = self.decode()
        area, bbox = mask_stats(bitmap)
        if area != self.area:
            raise ValidationError(
                f"mask {self.id}: declared area {self.area} != decoded area {area}"
            )
        if tuple(bbox) != tuple(self.bbox):
            raise ValidationError(
                f"mask {self.id}: declared bbox {self.bbox} != decoded bbox {bbox}"
            )

    def to_json(self) -> dict:
        doc = {
            "id": self.id,
            "frame_id": self.frame_id,
            "width": self.width,
            "height": self.height,
            "rle": list(self.rle),
            "bbox": list(self.bbox),
            "area": self.area,
        }
        if self.label is not None:
            doc["label"] = self.label
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "MaskRecord":
        try:
            return cls(
                id=str(doc["id"]),
                frame_id=str(doc["frame_id"]),
                width=int(doc["width"]),
                height=int(doc["height"]),
                rle=tuple(int(c) for c in doc["rle"]),
                bbox=tuple(int(v) for v in doc["bbox"]),
                area=int(doc["area"]),
                label=doc.get("label"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad mask record: {exc}") from exc


@dataclass(frozen=True, eq=False)
class TargetExemplar:
    """A labeled-good frame plus its prior-region (weapon) mask."""

    frame: Frame
    prior_mask: MaskRecord
    label: str = "good"

    def __post_init__(self) -> None:
        if self.label != "good":
            raise ValidationError(f"target exemplar must be labeled good, got {self.label!r}")
        if self.prior_mask.frame_id != self.frame.id:
            raise ValidationError(
                f"prior mask belongs to frame {self.prior_mask.frame_id}, "
                f"exemplar frame is {self.frame.id}"
            )
        if self.prior_mask.area <= 0:
            raise ValidationError("prior mask is empty")


def write_masks_jsonl(records: Iterable[MaskRecord], path: str | Path) -> None:
    """Write one JSON object per mask record, one record per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), sort_keys=True))
            fh.write("\n")


def read_masks_jsonl(path: str | Path, validate: bool = True) -> list[MaskRecord]:
    """Load mask records; re-validates invariants and reports bad lines.

    Collects every failure before raising so a single pass reports all
    offending line numbers.
    """
    records: list[MaskRecord] = []
    failures: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                record = MaskRecord.from_json(doc)
                if validate:
                    record.validate()
            except (FormatError, ValidationError) as exc:
                failures.append(f"line {lineno}: {exc}")
                continue
            records.append(record)
    if failures:
        raise ValidationError(f"{path}: {len(failures)} invalid record(s): " + "; ".join(failures))
    return records
