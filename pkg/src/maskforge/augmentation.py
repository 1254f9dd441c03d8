"""Augmentation stage: mask transforms, placement, and over/under compositing.

Positives are made by pasting a source mask over the weapon region of a
labeled-good target frame (pseudo-clip); negatives paste the same mask under
the weapon, respecting the prior mask, so the class signal is purely z-order.
Each (mask, target) pair shares one set of transform parameters.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from maskforge.core.seeding import derive_seed
from maskforge.core.types import Frame, MaskRecord, TargetExemplar
from maskforge.errors import DegenerateTransformError, ParameterError

log = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"

MIN_PRIOR_OVERLAP = 0.1
MIN_VISIBLE_FRACTION = 0.05
PLACEMENT_RETRIES = 8
TRANSFORM_RETRIES = 3


@dataclass(frozen=True)
class TransformParams:
    rotation_deg: float
    hflip: bool
    placement: tuple[int, int]
    scale: float = 1.0
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "rotation_deg": self.rotation_deg,
            "hflip": self.hflip,
            "placement": list(self.placement),
            "scale": self.scale,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class AugProfile:
    name: str
    rotation_range_deg: float
    hflip_prob: float
    scale_jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.rotation_range_deg < 0:
            raise ParameterError("rotation range must be >= 0")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ParameterError("hflip probability must be in [0, 1]")


# limited vs heavy: the two rotation regimes used when pairing masks with targets
PROFILES = {
    "limited": AugProfile("limited", rotation_range_deg=15.0, hflip_prob=0.5),
    "heavy": AugProfile("heavy", rotation_range_deg=180.0, hflip_prob=0.5),
}


@dataclass(frozen=True, eq=False)
class AugmentedSample:
    sample_id: str
    class_name: str
    provenance: dict
    image: np.ndarray | None = None


@dataclass(frozen=True)
class Placement:
    dx: int
    dy: int
    overlap: float
    visible_fraction: float


def _bilinear(img: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    x0 = np.floor(X).astype(np.int64)
    y0 = np.floor(Y).astype(np.int64)
    tx = X - x0
    ty = Y - y0

    def gather(yi, xi):
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        out = np.zeros(X.shape + (img.shape[2],), dtype=np.float64)
        out[valid] = img[yi[valid], xi[valid]]
        return out

    return (
        gather(y0, x0) * ((1 - tx) * (1 - ty))[..., None]
        + gather(y0, x0 + 1) * (tx * (1 - ty))[..., None]
        + gather(y0 + 1, x0) * ((1 - tx) * ty)[..., None]
        + gather(y0 + 1, x0 + 1) * (tx * ty)[..., None]
    )


def _rotate_scale(
    rgb: np.ndarray, bitmap: np.ndarray, rotation_deg: float, scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate about the patch center and scale, expanding the canvas to fit.

    RGB resamples bilinearly, the bitmap by nearest neighbour re-binarized
    at 0.5. Exact identity short-circuit only for rotation 0 at scale 1.
    """
    if rotation_deg == 0.0 and scale == 1.0:
        return rgb.copy(), bitmap.copy()
    h, w = bitmap.shape
    theta = np.deg2rad(rotation_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    out_w = max(1, int(np.ceil(scale * (w * abs(cos) + h * abs(sin)))))
    out_h = max(1, int(np.ceil(scale * (w * abs(sin) + h * abs(cos)))))
    cx_in, cy_in = (w - 1) / 2.0, (h - 1) / 2.0
    cx_out, cy_out = (out_w - 1) / 2.0, (out_h - 1) / 2.0
    Y, X = np.mgrid[0:out_h, 0:out_w]
    u = (X - cx_out) / scale
    v = (Y - cy_out) / scale
    src_x = cos * u + sin * v + cx_in
    src_y = -sin * u + cos * v + cy_in

    xi = np.rint(src_x).astype(np.int64)
    yi = np.rint(src_y).astype(np.int64)
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out_bitmap = np.zeros((out_h, out_w), dtype=bool)
    out_bitmap[inside] = bitmap[yi[inside], xi[inside]]

    sampled = _bilinear(rgb.astype(np.float64), src_x, src_y)
    out_rgb = np.clip(np.rint(sampled), 0, 255).astype(np.uint8)
    return out_rgb, out_bitmap


def transform_mask(
    source_frame: Frame, mask: MaskRecord, params: TransformParams
) -> tuple[np.ndarray, np.ndarray]:
    """Extract the masked sprite and apply hflip, rotation, and scale."""
    if mask.frame_id != source_frame.id:
        raise ParameterError(f"mask {mask.id} does not belong to frame {source_frame.id}")
    x, y, w, h = mask.bbox
    bitmap = mask.decode()[y : y + h, x : x + w]
    patch = source_frame.pixels[y : y + h, x : x + w].copy()
    patch[~bitmap] = 0
    if params.hflip:
        patch = patch[:, ::-1]
        bitmap = bitmap[:, ::-1]
    patch, bitmap = _rotate_scale(patch, bitmap, params.rotation_deg, params.scale)
    if not bitmap.any():
        raise DegenerateTransformError(
            f"transform of mask {mask.id} emptied the bitmap "
            f"(rotation {params.rotation_deg}, scale {params.scale})"
        )
    return patch, bitmap


def placement_stats(
    prior: np.ndarray, bitmap: np.ndarray, dx: int, dy: int
) -> tuple[float, float]:
    """(overlap, visible) fractions of the translated bitmap vs the prior mask.

    overlap = |bitmap ∩ prior| / area(bitmap); visible = in-frame bitmap
    pixels not covered by the prior, over area(bitmap).
    """
    fh, fw = prior.shape
    bh, bw = bitmap.shape
    area = int(bitmap.sum())
    sx0, sy0 = max(0, -dx), max(0, -dy)
    sx1, sy1 = min(bw, fw - dx), min(bh, fh - dy)
    if sx1 <= sx0 or sy1 <= sy0:
        return 0.0, 0.0
    sub = bitmap[sy0:sy1, sx0:sx1]
    prior_sub = prior[dy + sy0 : dy + sy1, dx + sx0 : dx + sx1]
    inter = int((sub & prior_sub).sum())
    visible = int((sub & ~prior_sub).sum())
    return inter / area, visible / area


def place_mask(
    target: TargetExemplar,
    bitmap: np.ndarray,
    rng: np.random.Generator,
    min_overlap: float = MIN_PRIOR_OVERLAP,
    min_visible: float = MIN_VISIBLE_FRACTION,
    retries: int = PLACEMENT_RETRIES,
) -> Placement:
    """Sample a bbox-origin offset intersecting the prior region.

    A random mask pixel is aligned onto a random prior pixel, which always
    intersects the prior and keeps at least one pixel in frame. Candidates are
    rejected until overlap >= min_overlap and the under-paste stays
    min_visible visible; after the retry budget the best-overlap candidate
    wins.
    """
    prior = target.prior_mask.decode()
    fh, fw = prior.shape
    bh, bw = bitmap.shape
    if bh > fh or bw > fw:
        raise ParameterError(f"bitmap {bw}x{bh} larger than frame {fw}x{fh}")
    prior_ys, prior_xs = np.nonzero(prior)
    src_ys, src_xs = np.nonzero(bitmap)
    best: Placement | None = None
    for _ in range(retries + 1):
        t = int(rng.integers(0, len(prior_ys)))
        s = int(rng.integers(0, len(src_ys)))
        dx = int(prior_xs[t]) - int(src_xs[s])
        dy = int(prior_ys[t]) - int(src_ys[s])
        overlap, visible = placement_stats(prior, bitmap, dx, dy)
        candidate = Placement(dx, dy, overlap, visible)
        if overlap >= min_overlap and visible >= min_visible:
            return candidate
        if best is None or candidate.overlap > best.overlap:
            best = candidate
    return best


def _paste_region(frame_shape, bitmap, dx, dy):
    fh, fw = frame_shape
    bh, bw = bitmap.shape
    sx0, sy0 = max(0, -dx), max(0, -dy)
    sx1, sy1 = min(bw, fw - dx), min(bh, fh - dy)
    if sx1 <= sx0 or sy1 <= sy0:
        return None
    sub = bitmap[sy0:sy1, sx0:sx1]
    region = (slice(dy + sy0, dy + sy1), slice(dx + sx0, dx + sx1))
    patch_box = (slice(sy0, sy1), slice(sx0, sx1))
    return sub, region, patch_box


def composite_over(
    target: TargetExemplar, patch: np.ndarray, bitmap: np.ndarray, offset: tuple[int, int]
) -> np.ndarray:
    """Pseudo-clip: pasted pixels win everywhere, weapon included."""
    out = target.frame.pixels.copy()
    placed = _paste_region(out.shape[:2], bitmap, *offset)
    if placed is None:
        return out
    sub, region, patch_box = placed
    out[region][sub] = patch[patch_box][sub]
    return out


def composite_under(
    target: TargetExemplar, patch: np.ndarray, bitmap: np.ndarray, offset: tuple[int, int]
) -> np.ndarray:
    """No-clip: the prior mask wins, then pasted pixels, then the target."""
    out = target.frame.pixels.copy()
    placed = _paste_region(out.shape[:2], bitmap, *offset)
    if placed is None:
        return out
    sub, region, patch_box = placed
    prior_sub = target.prior_mask.decode()[region]
    visible = sub & ~prior_sub
    out[region][visible] = patch[patch_box][visible]
    return out


def _safe(identifier: str) -> str:
    return identifier.replace("/", "+")


def _build_pair(
    mask: MaskRecord,
    source_frame: Frame,
    target: TargetExemplar,
    profile: AugProfile,
    seed: int,
    render: bool,
) -> list[AugmentedSample]:
    for attempt in range(TRANSFORM_RETRIES + 1):
        attempt_seed = derive_seed(seed, "pair", mask.id, target.frame.id, attempt)
        rng = np.random.default_rng(attempt_seed)
        rotation = float(rng.uniform(-profile.rotation_range_deg, profile.rotation_range_deg))
        hflip = bool(rng.random() < profile.hflip_prob)
        scale = 1.0
        if profile.scale_jitter > 0:
            scale = float(1.0 + rng.uniform(-profile.scale_jitter, profile.scale_jitter))
        try:
            patch, bitmap = transform_mask(
                source_frame, mask, TransformParams(rotation, hflip, (0, 0), scale)
            )
        except DegenerateTransformError:
            continue
        placement = place_mask(target, bitmap, rng)
        params = TransformParams(
            rotation, hflip, (placement.dx, placement.dy), scale, attempt_seed
        )
        base = f"{_safe(mask.id)}__{_safe(target.frame.id)}"
        provenance = {
            "source_mask_id": mask.id,
            "source_frame_id": mask.frame_id,
            "target_frame_id": target.frame.id,
            "transform": params.to_json(),
            "profile": profile.name,
        }
        offset = (placement.dx, placement.dy)
        positive = AugmentedSample(
            sample_id=f"{base}__pos",
            class_name=POSITIVE,
            provenance=provenance,
            image=composite_over(target, patch, bitmap, offset) if render else None,
        )
        neg_provenance = dict(provenance)
        if placement.visible_fraction < MIN_VISIBLE_FRACTION:
            neg_provenance["low_visibility"] = True
        negative = AugmentedSample(
            sample_id=f"{base}__neg",
            class_name=NEGATIVE,
            provenance=neg_provenance,
            image=composite_under(target, patch, bitmap, offset) if render else None,
        )
        return [positive, negative]
    log.warning("skipping pair (%s, %s): transform degenerate after retries",
                mask.id, target.frame.id)
    return []


def generate_pairs(
    masks: Sequence[MaskRecord],
    frames: Mapping[str, Frame],
    targets: Sequence[TargetExemplar],
    profile: AugProfile,
    seed: int,
    render: bool = True,
    workers: int = 1,
) -> list[AugmentedSample]:
    """Pair every mask with every target for one positive and one negative.

    Output is sorted by sample id and bit-identical for a given (inputs,
    profile, seed) regardless of worker count.
    """
    if not masks or not targets:
        raise ParameterError("need at least one mask and one target")
    missing = sorted({m.frame_id for m in masks} - set(frames))
    if missing:
        raise ParameterError(f"missing source frames: {missing[:5]}")
    jobs = [
        (mask, frames[mask.frame_id], target)
        for mask in sorted(masks, key=lambda m: m.id)
        for target in sorted(targets, key=lambda t: t.frame.id)
    ]

    def run(job):
        mask, frame, target = job
        return _build_pair(mask, frame, target, profile, seed, render)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(job) for job in jobs]
    samples = [sample for chunk in chunks for sample in chunk]
    samples.sort(key=lambda s: s.sample_id)
    return samples
