"""Canonical JSON, config hashing, and PNG I/O."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image


def canonical_json(obj: object) -> str:
    """Serialize with sorted keys and compact separators; stable across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj: object) -> str:
    """sha256 hex digest of the canonical JSON form of a config mapping."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def save_png(path: str | Path, pixels: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 buffer as an 8-bit RGB PNG."""
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8 buffer, got {arr.dtype} {arr.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    """Read a PNG into an (H, W, 3) uint8 buffer."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
