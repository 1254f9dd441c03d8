"""Segmentation and embedding backends.

The stub backends are deterministic and dependency-free so the contract test
always runs: segmentation by color-quantized connected components filtered by
prompt points, embedding by channel statistics of the masked region. Real
model backends (segment-anything, open_clip) load lazily and raise with a
diagnostic when their packages or weights are missing.
"""

from __future__ import annotations

import numpy as np

STUB_DIM_DEFAULT = 64

# reference colors for stub text prototypes
_TEXT_PALETTE = {
    "sky": (190, 215, 242),
    "grass": (60, 160, 70),
    "tree": (40, 120, 50),
    "path": (140, 124, 106),
    "road": (120, 120, 120),
    "water": (50, 110, 200),
    "red": (220, 40, 40),
    "blue": (40, 60, 220),
}


def _grid_points(width: int, height: int, spec: dict) -> list[tuple[float, float]]:
    n = int(spec.get("grid_points_per_side", 16))
    exclude = [tuple(r) for r in spec.get("exclude_regions", [])]
    include = [tuple(r) for r in spec.get("include_regions", [])]

    def inside(region, nx, ny):
        x0, y0, x1, y1 = region
        return x0 <= nx <= x1 and y0 <= ny <= y1

    points = []
    for j in range(n):
        y = (j + 0.5) * height / n
        for i in range(n):
            x = (i + 0.5) * width / n
            nx, ny = x / width, y / height
            if any(inside(r, nx, ny) for r in exclude):
                continue
            if include and not any(inside(r, nx, ny) for r in include):
                continue
            points.append((x, y))
    return points


class StubSegmenter:
    """Connected components of the color-quantized image, gated by prompt points."""

    name = "stub"

    def __init__(self, quant: int = 64, min_area: int = 24):
        self.quant = quant
        self.min_area = min_area

    def segment(self, pixels: np.ndarray, prompt_spec: dict) -> list[np.ndarray]:
        height, width = pixels.shape[:2]
        quantized = (pixels.astype(np.int32) // self.quant)
        key = quantized[:, :, 0] * 100 + quantized[:, :, 1] * 10 + quantized[:, :, 2]
        labels = np.full((height, width), -1, dtype=np.int32)
        current = 0
        for sy in range(height):
            for sx in range(width):
                if labels[sy, sx] != -1:
                    continue
                target = key[sy, sx]
                stack = [(sy, sx)]
                labels[sy, sx] = current
                while stack:
                    y, x = stack.pop()
                    for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                        if (0 <= ny < height and 0 <= nx < width
                                and labels[ny, nx] == -1 and key[ny, nx] == target):
                            labels[ny, nx] = current
                            stack.append((ny, nx))
                current += 1
        points = _grid_points(width, height, prompt_spec)
        hit = {int(labels[int(py), int(px)]) for px, py in points}
        masks = []
        for component in sorted(hit):
            bitmap = labels == component
            if int(bitmap.sum()) >= self.min_area:
                masks.append(bitmap)
        return masks


class StubEmbedder:
    """Channel statistics of the masked region, tiled to the configured dim."""

    name = "stub"

    def __init__(self, dim: int = STUB_DIM_DEFAULT, crop_policy: str = "masked-pixels"):
        if crop_policy not in ("masked-pixels", "bbox-crop"):
            raise ValueError(f"unknown crop policy {crop_policy!r}")
        self.dim = dim
        self.crop_policy = crop_policy

    def _features(self, values: np.ndarray) -> np.ndarray:
        feats = []
        for channel in range(3):
            v = values[:, channel].astype(np.float64)
            hist = np.bincount(np.clip(v, 0, 255).astype(np.int64) // 32, minlength=8)
            feats.extend(np.sqrt(hist / max(1, len(v))))
            feats.append(v.mean() / 255.0)
            feats.append(v.std() / 128.0)
        raw = np.array(feats)
        reps = int(np.ceil(self.dim / raw.size))
        tiled = np.tile(raw, reps)[: self.dim]
        norm = np.linalg.norm(tiled)
        if norm == 0:
            raise ValueError("degenerate embedding")
        return (tiled / norm).astype(np.float32)

    def embed_mask(self, pixels: np.ndarray, bitmap: np.ndarray) -> np.ndarray:
        if self.crop_policy == "masked-pixels":
            values = pixels[bitmap]
        else:
            rows = np.flatnonzero(bitmap.any(axis=1))
            cols = np.flatnonzero(bitmap.any(axis=0))
            values = pixels[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1].reshape(-1, 3)
        return self._features(values)

    def embed_text(self, token: str) -> np.ndarray:
        color = _TEXT_PALETTE.get(token)
        if color is None:
            raise ValueError(
                f"stub text embedder has no reference color for {token!r}; "
                f"known: {sorted(_TEXT_PALETTE)}"
            )
        patch = np.tile(np.array(color, dtype=np.uint8), (16, 16, 1))
        return self._features(patch.reshape(-1, 3))


class SamSegmenter:
    """Real promptable segmentation; requires segment-anything and a checkpoint."""

    name = "sam"

    def __init__(self, checkpoint: str | None = None, model_type: str = "vit_b"):
        try:
            import torch  # noqa: F401
            from segment_anything import SamAutomaticMaskGenerator, sam_model_registry
        except ImportError as exc:
            raise RuntimeError(
                f"segment-anything backend unavailable: {exc}; install "
                "segment-anything and provide a checkpoint"
            ) from exc
        if not checkpoint:
            raise RuntimeError("sam backend needs a checkpoint path in model config")
        sam = sam_model_registry[model_type](checkpoint=checkpoint)
        self._generator = SamAutomaticMaskGenerator(sam)

    def segment(self, pixels: np.ndarray, prompt_spec: dict) -> list[np.ndarray]:
        height, width = pixels.shape[:2]
        points = _grid_points(width, height, prompt_spec)
        results = self._generator.generate(pixels)
        masks = []
        for result in results:
            bitmap = result["segmentation"]
            if any(bitmap[int(py), int(px)] for px, py in points):
                masks.append(bitmap.astype(bool))
        return masks


class ClipEmbedder:
    """Real text-image embeddings; requires open_clip_torch."""

    name = "clip"

    def __init__(self, model_name: str = "ViT-B-32", pretrained: str = "openai",
                 crop_policy: str = "masked-pixels"):
        try:
            import open_clip
            import torch
        except ImportError as exc:
            raise RuntimeError(
                f"clip backend unavailable: {exc}; install open_clip_torch"
            ) from exc
        self._torch = torch
        self._open_clip = open_clip
        self.crop_policy = crop_policy
        self._model, _, self._preprocess = open_clip.create_model_and_transforms(
            model_name, pretrained=pretrained
        )
        self._tokenizer = open_clip.get_tokenizer(model_name)
        self.dim = self._model.visual.output_dim

    def embed_mask(self, pixels: np.ndarray, bitmap: np.ndarray) -> np.ndarray:
        from PIL import Image

        rows = np.flatnonzero(bitmap.any(axis=1))
        cols = np.flatnonzero(bitmap.any(axis=0))
        crop = pixels[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1].copy()
        if self.crop_policy == "masked-pixels":
            sub = bitmap[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
            crop[~sub] = 0
        tensor = self._preprocess(Image.fromarray(crop)).unsqueeze(0)
        with self._torch.no_grad():
            features = self._model.encode_image(tensor)[0]
            features = features / features.norm()
        return features.cpu().numpy().astype(np.float32)

    def embed_text(self, token: str) -> np.ndarray:
        tokens = self._tokenizer([token])
        with self._torch.no_grad():
            features = self._model.encode_text(tokens)[0]
            features = features / features.norm()
        return features.cpu().numpy().astype(np.float32)


def build_segmenter(model_config: dict):
    kind = model_config.get("segmenter", "stub")
    if kind == "stub":
        return StubSegmenter(
            quant=int(model_config.get("stub_quant", 64)),
            min_area=int(model_config.get("stub_min_area", 24)),
        )
    if kind == "sam":
        return SamSegmenter(
            checkpoint=model_config.get("sam_checkpoint"),
            model_type=model_config.get("sam_model_type", "vit_b"),
        )
    raise ValueError(f"unknown segmenter backend {kind!r}")


def build_embedder(model_config: dict, crop_policy: str):
    kind = model_config.get("embedder", "stub")
    if kind == "stub":
        return StubEmbedder(
            dim=int(model_config.get("embedding_dim", STUB_DIM_DEFAULT)),
            crop_policy=crop_policy,
        )
    if kind == "clip":
        return ClipEmbedder(
            model_name=model_config.get("clip_model", "ViT-B-32"),
            pretrained=model_config.get("clip_pretrained", "openai"),
            crop_policy=crop_policy,
        )
    raise ValueError(f"unknown embedder backend {kind!r}")
