"""Promptable segmentation provider boundary.

Grid-point prompt generation with include/exclude regions, an exact synthetic
segmenter over fixture ground truth, and mask import from external backends
via masks.jsonl. Real segmentation models run out of process and talk to the
engine only through the interchange file.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from maskforge.core.types import Frame, MaskRecord, read_masks_jsonl
from maskforge.errors import ParameterError, ProviderError, ValidationError

Region = tuple[float, float, float, float]


@dataclass(frozen=True)
class PromptSpec:
    """Uniform point grid with normalized exclude/include rectangles.

    Exclude regions override include regions when both contain a point:
    ignore prompts encode hard negative priors.
    """

    grid_points_per_side: int = 16
    exclude_regions: tuple[Region, ...] = ()
    include_regions: tuple[Region, ...] = ()

    def __post_init__(self) -> None:
        if self.grid_points_per_side < 1:
            raise ValidationError("grid_points_per_side must be >= 1")
        for region in self.exclude_regions + self.include_regions:
            x0, y0, x1, y1 = region
            if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
                raise ValidationError(f"bad normalized region {region}")

    def to_json(self) -> dict:
        return {
            "grid_points_per_side": self.grid_points_per_side,
            "exclude_regions": [list(r) for r in self.exclude_regions],
            "include_regions": [list(r) for r in self.include_regions],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PromptSpec":
        return cls(
            grid_points_per_side=int(doc.get("grid_points_per_side", 16)),
            exclude_regions=tuple(tuple(r) for r in doc.get("exclude_regions", [])),
            include_regions=tuple(tuple(r) for r in doc.get("include_regions", [])),
        )


def _contains(region: Region, nx: float, ny: float) -> bool:
    x0, y0, x1, y1 = region
    return x0 <= nx <= x1 and y0 <= ny <= y1


def generate_point_grid(width: int, height: int, spec: PromptSpec) -> list[tuple[float, float]]:
    """n x n grid at cell centers, filtered by the spec's regions, row-major."""
    n = spec.grid_points_per_side
    points = []
    for j in range(n):
        y = (j + 0.5) * height / n
        ny = y / height
        for i in range(n):
            x = (i + 0.5) * width / n
            nx = x / width
            if any(_contains(r, nx, ny) for r in spec.exclude_regions):
                continue
            if spec.include_regions and not any(
                _contains(r, nx, ny) for r in spec.include_regions
            ):
                continue
            points.append((x, y))
    if not points:
        raise ParameterError("prompt spec filtered out every grid point")
    return points


class SegmentationProvider(Protocol):
    def segment(self, frame: Frame, spec: PromptSpec) -> list[MaskRecord]: ...


class SyntheticSegmenter:
    """Exact segmenter over known per-frame candidate masks.

    Returns the candidates whose bitmap contains at least one prompt point,
    deduplicated by exact bitmap equality (lowest id wins) and ordered by
    (area desc, id).
    """

    def __init__(self, candidates: Mapping[str, Sequence[MaskRecord]]):
        self._candidates = {k: list(v) for k, v in candidates.items()}

    def segment(self, frame: Frame, spec: PromptSpec) -> list[MaskRecord]:
        if frame.id not in self._candidates:
            raise ProviderError(f"synthetic segmenter has no ground truth for frame {frame.id}")
        points = generate_point_grid(frame.width, frame.height, spec)
        pixel_points = [(int(y), int(x)) for x, y in points]
        hits = []
        for mask in sorted(self._candidates[frame.id], key=lambda m: m.id):
            bitmap = mask.decode()
            if any(bitmap[py, px] for py, px in pixel_points):
                hits.append(mask)
        seen: dict[tuple, str] = {}
        unique = []
        for mask in hits:  # id order: first equal bitmap wins
            key = (mask.width, mask.height, mask.rle)
            if key in seen:
                continue
            seen[key] = mask.id
            unique.append(mask)
        unique.sort(key=lambda m: (-m.area, m.id))
        return unique


def segment_corpus(
    provider: SegmentationProvider,
    frames: Sequence[Frame],
    spec: PromptSpec,
    workers: int = 1,
) -> list[MaskRecord]:
    """Segment frames (possibly in parallel) merged in frame-id order."""
    ordered = sorted(frames, key=lambda f: f.id)

    def run(frame: Frame) -> list[MaskRecord]:
        return provider.segment(frame, spec)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, ordered))
    else:
        chunks = [run(frame) for frame in ordered]
    return [mask for chunk in chunks for mask in chunk]


def import_masks(path: str | Path) -> list[MaskRecord]:
    """Load masks.jsonl, re-validating every record invariant."""
    return read_masks_jsonl(path, validate=True)
