"""Procedural desk-scale game-world stand-in.

Renders scenes with textured background regions (sky band, striped path,
tree blobs), colored object sprites, and a fixed multi-tone weapon sprite
anchored in the bottom-right corner. Clipping is realized purely by draw
order: with probability ``clip_probability`` one object is drawn over the
weapon, otherwise every object is drawn under it, so positives and negatives
are pixel-identical outside the weapon-overlap region.

Ground-truth masks are generated analytically from the draw-order owner map,
never by segmentation, so they are pixel-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from maskforge.core.seeding import rng_for
from maskforge.core.serial import config_hash
from maskforge.core.types import Frame, MaskRecord, TargetExemplar
from maskforge.errors import ValidationError, VocabularyError

SHAPES = ("circle", "triangle", "square", "ring", "diamond", "cross")
# Two saturated hues with mirrored channel values. The near-zero low channels
# stay in the bottom histogram bin at every lighting level, so shape identity
# (the per-shape tone set) lives entirely in the high channel and cross-hue
# prototypes stay balanced.
HUES = {
    "red": (235, 10, 10),
    "blue": (10, 10, 235),
}
SPRITE_CATEGORIES = tuple(f"{shape}_{hue}" for shape in SHAPES for hue in HUES)
BACKGROUND_CATEGORIES = ("sky", "path", "tree")
WEAPON_LABEL = "weapon"

_GROUND = np.array([146, 152, 118], dtype=np.float64)
_NEUTRAL = np.array([128, 128, 128], dtype=np.uint8)
_EXEMPLAR_SEED = 0x66697874  # fixed: exemplars must be identical across runs
_EXEMPLARS_PER_TOKEN = 8


def vocabulary() -> list[str]:
    """Every token the synthetic text embedder understands."""
    return sorted(SPRITE_CATEGORIES + tuple(SHAPES) + BACKGROUND_CATEGORIES + (WEAPON_LABEL,))


def default_category_weights() -> dict[str, float]:
    """Skewed defaults: background masks dominate, as in raw gameplay."""
    weights = {category: 1.0 for category in SPRITE_CATEGORIES}
    weights.update({"sky": 1.0, "path": 1.0, "tree": 3.0})
    return weights


@dataclass(frozen=True)
class SceneConfig:
    """Generation parameters for one fixture corpus.

    Sprite-category weights are relative sampling probabilities for scene
    objects. Background-category weights are expected mask counts per scene
    (sky and path cap at one mask each; the tree count varies around its
    weight).
    """

    width: int = 128
    height: int = 128
    object_count_range: tuple[int, int] = (1, 4)
    category_weights: dict[str, float] = field(default_factory=default_category_weights)
    clip_probability: float = 0.0
    id_categories: tuple[str, ...] = ("circle_red", "square_blue", "triangle_red", "ring_blue")
    ood_categories: tuple[str, ...] = tuple(
        c for c in SPRITE_CATEGORIES
        if c not in ("circle_red", "square_blue", "triangle_red", "ring_blue")
    )
    seed: int = 0

    def __post_init__(self) -> None:
        if self.width < 48 or self.height < 48:
            raise ValidationError("scene dimensions must be at least 48x48")
        lo, hi = self.object_count_range
        if lo < 0 or hi < lo:
            raise ValidationError(f"bad object_count_range {self.object_count_range}")
        if any(w < 0 for w in self.category_weights.values()):
            raise ValidationError("category weights must be non-negative")
        if not any(w > 0 for w in self.category_weights.values()):
            raise ValidationError("category weights must have positive sum")
        overlap = set(self.id_categories) & set(self.ood_categories)
        if overlap:
            raise ValidationError(f"id/ood categories overlap: {sorted(overlap)}")

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "object_count_range": list(self.object_count_range),
            "category_weights": dict(sorted(self.category_weights.items())),
            "clip_probability": self.clip_probability,
            "id_categories": list(self.id_categories),
            "ood_categories": list(self.ood_categories),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SceneConfig":
        return cls(
            width=int(doc.get("width", 128)),
            height=int(doc.get("height", 128)),
            object_count_range=tuple(doc.get("object_count_range", (1, 4))),
            category_weights={str(k): float(v) for k, v in doc.get(
                "category_weights", default_category_weights()).items()},
            clip_probability=float(doc.get("clip_probability", 0.0)),
            id_categories=tuple(doc.get("id_categories",
                                        ("circle_red", "square_blue",
                                         "triangle_red", "ring_blue"))),
            ood_categories=tuple(doc.get("ood_categories", tuple(
                c for c in SPRITE_CATEGORIES
                if c not in ("circle_red", "square_blue", "triangle_red", "ring_blue")))),
            seed=int(doc.get("seed", 0)),
        )

    def hash_prefix(self) -> str:
        return config_hash(self.to_json())[:8]

    def restricted(self, categories: tuple[str, ...]) -> "SceneConfig":
        """Copy with sprite weights zeroed outside ``categories``."""
        weights = {
            k: (v if k in categories or k in BACKGROUND_CATEGORIES else 0.0)
            for k, v in self.category_weights.items()
        }
        for category in categories:
            weights.setdefault(category, 1.0)
        return replace(self, category_weights=weights)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    masks: list[MaskRecord]
    weapon_mask: MaskRecord
    is_clipping: bool
    clipping_object_id: str | None = None


# ---------------------------------------------------------------------------
# sprites

def _shape_bitmap(shape: str, size: int) -> np.ndarray:
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    if shape == "circle":
        return (xx - c) ** 2 + (yy - c) ** 2 <= (c * 0.96) ** 2
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "triangle":
        halfwidth = (yy + 0.5) * (c / size)
        return np.abs(xx - c) <= halfwidth
    if shape == "ring":
        d2 = (xx - c) ** 2 + (yy - c) ** 2
        return (d2 <= (c * 0.96) ** 2) & (d2 >= (c * 0.52) ** 2)
    if shape == "diamond":
        return np.abs(xx - c) + np.abs(yy - c) <= c
    if shape == "cross":
        t = max(1.0, size / 6.0)
        return (np.abs(xx - c) <= t) | (np.abs(yy - c) <= t)
    raise VocabularyError(shape, list(SHAPES))


def _shape_texture(shape: str, size: int) -> np.ndarray:
    """Per-shape brightness pattern; makes the hue histogram shape-specific."""
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    # tone sets are disjoint across shapes even under the scenes' lighting
    # jitter, so the hue histogram carries shape identity
    if shape == "circle":
        radius = np.sqrt((xx - c) ** 2 + (yy - c) ** 2) / max(1.0, c)
        return 0.78 - 0.08 * np.clip(radius, 0, 1)
    if shape == "square":
        return np.ones((size, size))
    if shape == "triangle":
        return np.where((yy // 2) % 2 == 0, 1.0, 0.50)
    if shape == "ring":
        return np.full((size, size), 0.90)
    if shape == "diamond":
        return np.where(((xx // 2) + (yy // 2)) % 2 == 0, 0.90, 0.38)
    if shape == "cross":
        return np.full((size, size), 0.58)
    raise VocabularyError(shape, list(SHAPES))


@lru_cache(maxsize=512)
def render_sprite(shape: str, hue: str, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Sprite patch: hue fill modulated by the shape's brightness texture."""
    bitmap = _shape_bitmap(shape, size)
    color = np.array(HUES[hue], dtype=np.float64)
    texture = _shape_texture(shape, size)
    rgb = np.zeros((size, size, 3), dtype=np.float64)
    rgb[bitmap] = color[None, :] * texture[bitmap, None]
    rgb.setflags(write=False)
    bitmap.setflags(write=False)
    return rgb, bitmap


@lru_cache(maxsize=8)
def weapon_sprite(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed multi-tone weapon patch sized against the frame (~12% of area)."""
    ww = max(24, int(round(width * 0.48)))
    wh = max(16, int(round(height * 0.38)))
    rgb = np.zeros((wh, ww, 3), dtype=np.float64)
    bitmap = np.zeros((wh, ww), dtype=bool)

    def block(x0f, y0f, x1f, y1f, color):
        x0, x1 = int(x0f * ww), int(x1f * ww)
        y0, y1 = int(y0f * wh), int(y1f * wh)
        bitmap[y0:y1, x0:x1] = True
        rgb[y0:y1, x0:x1] = color

    block(0.02, 0.22, 0.88, 0.55, (60, 60, 70))      # barrel
    block(0.48, 0.38, 1.00, 0.88, (85, 85, 95))      # body
    block(0.62, 0.70, 0.95, 1.00, (122, 74, 40))     # grip
    block(0.02, 0.32, 0.60, 0.42, (200, 200, 208))   # accent stripe
    block(0.00, 0.15, 0.12, 0.62, (40, 40, 48))      # muzzle
    rgb.setflags(write=False)
    bitmap.setflags(write=False)
    return rgb, bitmap


def weapon_anchor(config: SceneConfig) -> tuple[int, int]:
    _, bitmap = weapon_sprite(config.width, config.height)
    wh, ww = bitmap.shape
    return config.width - ww, config.height - wh


def weapon_footprint(config: SceneConfig) -> np.ndarray:
    """Frame-sized boolean footprint of the weapon sprite (fixed per config)."""
    _, bitmap = weapon_sprite(config.width, config.height)
    x0, y0 = weapon_anchor(config)
    out = np.zeros((config.height, config.width), dtype=bool)
    out[y0 : y0 + bitmap.shape[0], x0 : x0 + bitmap.shape[1]] = bitmap
    return out


def prior_region_bbox(config: SceneConfig) -> tuple[int, int, int, int]:
    """Tight bbox (x, y, w, h) of the weapon footprint; the crop prior."""
    from maskforge.core.rle import mask_stats

    _, bbox = mask_stats(weapon_footprint(config))
    return bbox


# ---------------------------------------------------------------------------
# textures

def _sky_rows(height: int) -> int:
    return max(8, int(round(height * 0.30)))


def _paint_sky(canvas: np.ndarray, rows: int, rng: np.random.Generator) -> None:
    top = np.array([150, 190, 235], dtype=np.float64)
    bottom = np.array([215, 235, 248], dtype=np.float64)
    for y in range(rows):
        t = y / max(1, rows - 1)
        canvas[y, :] = top * (1 - t) + bottom * t
    canvas[:rows] += rng.integers(-5, 6, size=(rows, canvas.shape[1], 3))


def _paint_path(canvas: np.ndarray, y0: int, band: int) -> None:
    h, w = canvas.shape[:2]
    yy, xx = np.mgrid[y0 : y0 + band, 0:w]
    stripe = ((xx + yy) // 4) % 2 == 0
    region = canvas[y0 : y0 + band, :]
    region[stripe] = (168, 150, 128)
    region[~stripe] = (112, 98, 84)


def _tree_bitmap(w: int, h: int, cx: int, cy: int, rng: np.random.Generator) -> np.ndarray:
    bitmap = np.zeros((h, w), dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(int(rng.integers(3, 6))):
        ox = cx + int(rng.integers(-6, 7))
        oy = cy + int(rng.integers(-5, 6))
        r = int(rng.integers(5, 10))
        bitmap |= (xx - ox) ** 2 + (yy - oy) ** 2 <= r * r
    return bitmap


def _paint_tree(canvas: np.ndarray, bitmap: np.ndarray) -> None:
    h, w = canvas.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    speckle = (xx * 7 + yy * 13) % 5 == 0
    canvas[bitmap & ~speckle] = (32, 110, 45)
    canvas[bitmap & speckle] = (62, 150, 70)


# ---------------------------------------------------------------------------
# scenes

class _Painter:
    """Draw-order compositor that tracks which element owns each pixel."""

    def __init__(self, width: int, height: int):
        self.canvas = np.zeros((height, width, 3), dtype=np.float64)
        self.owner = np.full((height, width), -1, dtype=np.int32)
        self.keys: list[tuple[str, str]] = []  # (kind, label) per owner index

    def claim(self, bitmap: np.ndarray, kind: str, label: str) -> int:
        index = len(self.keys)
        self.keys.append((kind, label))
        self.owner[bitmap] = index
        return index

    def paste(self, rgb: np.ndarray, bitmap: np.ndarray, x0: int, y0: int,
              kind: str, label: str) -> int:
        h, w = bitmap.shape
        fh, fw = self.owner.shape
        sx0, sy0 = max(0, -x0), max(0, -y0)
        sx1 = min(w, fw - x0)
        sy1 = min(h, fh - y0)
        index = len(self.keys)
        self.keys.append((kind, label))
        if sx1 <= sx0 or sy1 <= sy0:
            return index
        sub = bitmap[sy0:sy1, sx0:sx1]
        region = (slice(y0 + sy0, y0 + sy1), slice(x0 + sx0, x0 + sx1))
        self.canvas[region][sub] = rgb[sy0:sy1, sx0:sx1][sub]
        self.owner[region][sub] = index
        return index


def _weighted_choice(rng: np.random.Generator, options: list[str],
                     weights: list[float]) -> str:
    p = np.array(weights, dtype=np.float64)
    p /= p.sum()
    return options[int(rng.choice(len(options), p=p))]


def gen_scene(config: SceneConfig, index: int) -> tuple[Frame, GroundTruth]:
    """Render one deterministic scene; ground truth from the owner map."""
    rng = rng_for(config.seed, "scene", index)
    w, h = config.width, config.height
    frame_id = f"{config.hash_prefix()}-{index:05d}"
    painter = _Painter(w, h)

    # ground with a mild deterministic dither
    yy, xx = np.mgrid[0:h, 0:w]
    painter.canvas[:, :] = _GROUND
    painter.canvas += (((xx * 3 + yy * 5) % 7) - 3)[:, :, None] * 0.8

    weights = config.category_weights
    sky_h = _sky_rows(h)
    element_masks: list[tuple[str, int]] = []  # (label, owner index) in draw order

    if weights.get("sky", 0.0) > 0:
        _paint_sky(painter.canvas, sky_h, rng)
        sky_bitmap = np.zeros((h, w), dtype=bool)
        sky_bitmap[:sky_h] = True
        element_masks.append(("sky", painter.claim(sky_bitmap, "background", "sky")))

    wx0, wy0 = weapon_anchor(config)
    if rng.random() < min(1.0, weights.get("path", 0.0)):
        band = max(6, h // 10)
        y_lo = sky_h + 2
        y_hi = max(y_lo + 1, wy0 - band - 2)
        y_path = int(rng.integers(y_lo, y_hi))
        _paint_path(painter.canvas, y_path, band)
        path_bitmap = np.zeros((h, w), dtype=bool)
        path_bitmap[y_path : y_path + band] = True
        element_masks.append(("path", painter.claim(path_bitmap, "background", "path")))

    tree_weight = weights.get("tree", 0.0)
    n_trees = max(0, int(round(tree_weight + rng.uniform(-1.0, 1.0)))) if tree_weight > 0 else 0
    for t in range(n_trees):
        cx = int(rng.integers(4, w - 4))
        cy = int(rng.integers(max(4, sky_h - 8), sky_h + 16))
        bitmap = _tree_bitmap(w, h, cx, cy, rng)
        if not bitmap.any():
            continue
        _paint_tree(painter.canvas, bitmap)
        element_masks.append(("tree", painter.claim(bitmap, "background", f"tree{t}")))

    sprite_cats = [c for c in SPRITE_CATEGORIES if weights.get(c, 0.0) > 0]
    sprite_wts = [weights[c] for c in sprite_cats]
    lo, hi = config.object_count_range
    n_objects = int(rng.integers(lo, hi + 1)) if sprite_cats else 0

    is_clipping = bool(sprite_cats) and rng.random() < config.clip_probability
    if is_clipping and n_objects == 0:
        n_objects = 1
    clipper = int(rng.integers(0, n_objects)) if is_clipping else -1

    weapon_rgb, weapon_bm = weapon_sprite(w, h)
    deferred = None
    for i in range(n_objects):
        category = _weighted_choice(rng, sprite_cats, sprite_wts)
        shape, hue = category.rsplit("_", 1)
        size = int(rng.integers(max(10, w // 12), max(14, w // 7)))
        rgb, bitmap = render_sprite(shape, hue, size)
        # per-instance lighting jitter keeps same-category masks distinct
        brightness = rng.uniform(0.92, 1.08)
        rgb = np.clip(rgb * brightness, 0, 255)
        if i == clipper:
            # align a random sprite pixel onto a random weapon pixel
            sy, sx = _random_pixel(bitmap, rng)
            ty, tx = _random_pixel(weapon_bm, rng)
            x0, y0 = wx0 + tx - sx, wy0 + ty - sy
            deferred = (rgb, bitmap, x0, y0, category)
            continue
        # non-clipping objects avoid the weapon area so their masks stay whole
        for _attempt in range(6):
            x0 = int(rng.integers(0, max(1, w - size)))
            y0 = int(rng.integers(sky_h // 2, max(sky_h // 2 + 1, h - size)))
            if x0 + size <= wx0 or y0 + size <= wy0:
                break
        owner = painter.paste(rgb, bitmap, x0, y0, "object", category)
        element_masks.append((category, owner))

    weapon_owner = painter.paste(weapon_rgb, weapon_bm, wx0, wy0, "weapon", WEAPON_LABEL)

    clipping_object_id = None
    if deferred is not None:
        rgb, bitmap, x0, y0, category = deferred
        owner = painter.paste(rgb, bitmap, x0, y0, "object", category)
        element_masks.append((category, owner))

    pixels = np.clip(painter.canvas, 0, 255).astype(np.uint8)
    frame = Frame(id=frame_id, width=w, height=h, pixels=pixels)

    masks: list[MaskRecord] = []
    seq = 0
    for label, owner in element_masks:
        visible = painter.owner == owner
        if not visible.any():
            continue
        mask = MaskRecord.from_bitmap(f"{frame_id}/m{seq:02d}", frame_id, visible, label=label)
        if deferred is not None and owner == len(painter.keys) - 1:
            clipping_object_id = mask.id
        masks.append(mask)
        seq += 1

    weapon_mask = MaskRecord.from_bitmap(
        f"{frame_id}/weapon", frame_id, weapon_footprint(config), label=WEAPON_LABEL
    )
    truth = GroundTruth(
        masks=masks,
        weapon_mask=weapon_mask,
        is_clipping=is_clipping,
        clipping_object_id=clipping_object_id,
    )
    return frame, truth


def _random_pixel(bitmap: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    ys, xs = np.nonzero(bitmap)
    pick = int(rng.integers(0, len(ys)))
    return int(ys[pick]), int(xs[pick])


def gen_corpus(
    config: SceneConfig, n: int
) -> tuple[list[tuple[Frame, GroundTruth]], list[tuple[str, int]]]:
    """Generate ``n`` scenes plus the label histogram over all their masks."""
    if n < 1:
        raise ValidationError("corpus size must be >= 1")
    scenes = [gen_scene(config, index) for index in range(n)]
    counts: dict[str, int] = {}
    for _, truth in scenes:
        for mask in truth.masks:
            counts[mask.label] = counts.get(mask.label, 0) + 1
    histogram = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return scenes, histogram


def target_exemplar(frame: Frame, config: SceneConfig) -> TargetExemplar:
    """Wrap a labeled-good frame with its weapon prior mask."""
    prior = MaskRecord.from_bitmap(
        f"{frame.id}/prior", frame.id, weapon_footprint(config), label=WEAPON_LABEL
    )
    return TargetExemplar(frame=frame, prior_mask=prior)


# ---------------------------------------------------------------------------
# canonical exemplars for the text space

def _exemplar_frame(token: str, i: int, painter_fn) -> tuple[Frame, MaskRecord]:
    size = 64
    canvas = np.tile(_NEUTRAL.astype(np.float64), (size, size, 1))
    bitmap = painter_fn(canvas, size, i)
    frame = Frame(
        id=f"exemplar/{token}/{i}",
        width=size,
        height=size,
        pixels=np.clip(canvas, 0, 255).astype(np.uint8),
    )
    mask = MaskRecord.from_bitmap(f"exemplar/{token}/{i}/mask", frame.id, bitmap, label=token)
    return frame, mask


def _sprite_exemplar(shape: str, hue: str, i: int):
    # exemplars span the sizes and lighting levels scenes draw from
    def paint(canvas, size, _i):
        sprite_size = 14 + (i % 5) * 2
        brightness = (0.92, 1.0, 1.08)[i % 3]
        rgb, bitmap = render_sprite(shape, hue, sprite_size)
        x0 = (size - sprite_size) // 2
        out = np.zeros((size, size), dtype=bool)
        out[x0 : x0 + sprite_size, x0 : x0 + sprite_size] = bitmap
        canvas[x0 : x0 + sprite_size, x0 : x0 + sprite_size][bitmap] = np.clip(
            rgb[bitmap] * brightness, 0, 255
        )
        return out

    return paint


def _background_exemplar(token: str, i: int):
    def paint(canvas, size, _i):
        rng = rng_for(_EXEMPLAR_SEED, "exemplar", token, i)
        out = np.zeros((size, size), dtype=bool)
        if token == "sky":
            rows = size // 2
            _paint_sky(canvas, rows, rng)
            out[:rows] = True
        elif token == "path":
            band = 10
            y0 = 8 + (i % 4) * 8
            _paint_path(canvas, y0, band)
            out[y0 : y0 + band] = True
        elif token == "tree":
            bitmap = _tree_bitmap(size, size, size // 2, size // 2, rng)
            _paint_tree(canvas, bitmap)
            out |= bitmap
        elif token == WEAPON_LABEL:
            rgb, bitmap = weapon_sprite(128, 128)
            x0 = size - bitmap.shape[1]
            y0 = size - bitmap.shape[0]
            sub = bitmap[max(0, -y0):, max(0, -x0):]
            ry0, rx0 = max(0, y0), max(0, x0)
            canvas[ry0:, rx0:][sub] = rgb[max(0, -y0):, max(0, -x0):][sub]
            out[ry0:, rx0:] = sub
        return out

    return paint


@lru_cache(maxsize=64)
def canonical_exemplars(token: str) -> tuple[tuple[Frame, MaskRecord], ...]:
    """Fixed set of 8 seeded renders of a vocabulary token on neutral background."""
    if token not in vocabulary():
        raise VocabularyError(token, vocabulary())
    out = []
    for i in range(_EXEMPLARS_PER_TOKEN):
        if token in SPRITE_CATEGORIES:
            shape, hue = token.rsplit("_", 1)
            out.append(_exemplar_frame(token, i, _sprite_exemplar(shape, hue, i)))
        elif token in SHAPES:
            hue = list(HUES)[i % len(HUES)]
            out.append(_exemplar_frame(token, i, _sprite_exemplar(token, hue, i)))
        else:
            out.append(_exemplar_frame(token, i, _background_exemplar(token, i)))
    return tuple(out)


# ---------------------------------------------------------------------------
# corpus serialization (fixture-gen artifacts)

def write_truth_jsonl(scenes: list[tuple[Frame, GroundTruth]], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for frame, truth in scenes:
            doc = {
                "frame_id": frame.id,
                "width": frame.width,
                "height": frame.height,
                "is_clipping": truth.is_clipping,
                "clipping_object_id": truth.clipping_object_id,
                "weapon_mask": truth.weapon_mask.to_json(),
                "masks": [m.to_json() for m in truth.masks],
            }
            fh.write(json.dumps(doc, sort_keys=True))
            fh.write("\n")


def read_truth_jsonl(path: str | Path) -> dict[str, GroundTruth]:
    """Load per-frame ground truth keyed by frame id."""
    out: dict[str, GroundTruth] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out[doc["frame_id"]] = GroundTruth(
                masks=[MaskRecord.from_json(m) for m in doc["masks"]],
                weapon_mask=MaskRecord.from_json(doc["weapon_mask"]),
                is_clipping=bool(doc["is_clipping"]),
                clipping_object_id=doc.get("clipping_object_id"),
            )
    return out
