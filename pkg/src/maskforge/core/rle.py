"""Run-length codec for binary masks.

Runs are row-major and alternate background then foreground, starting with the
background run (which may be 0). The counts always sum to width * height.
"""

from __future__ import annotations

import numpy as np

from maskforge.errors import FormatError, ParameterError, ValidationError


def rle_encode(bitmap: np.ndarray) -> list[int]:
    """Encode a binary bitmap (H, W) into alternating run counts."""
    bitmap = np.asarray(bitmap)
    if bitmap.ndim != 2 or bitmap.shape[0] == 0 or bitmap.shape[1] == 0:
        raise ParameterError(f"bitmap must be 2-D and non-empty, got shape {bitmap.shape}")
    flat = (bitmap.ravel() != 0).astype(np.int8)
    boundaries = np.flatnonzero(np.diff(flat))
    edges = np.concatenate(([0], boundaries + 1, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0] == 1:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def rle_decode(counts: list[int], width: int, height: int) -> np.ndarray:
    """Decode run counts back into a boolean bitmap of shape (height, width)."""
    if width <= 0 or height <= 0:
        raise ParameterError(f"invalid dimensions {width}x{height}")
    counts = list(counts)
    if any(c < 0 for c in counts):
        raise FormatError("negative run count")
    total = sum(counts)
    if total != width * height:
        raise FormatError(
            f"run counts sum to {total}, expected {width * height} for {width}x{height}"
        )
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for count in counts:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    return flat.reshape(height, width)


def mask_stats(bitmap: np.ndarray) -> tuple[int, tuple[int, int, int, int]]:
    """Area (count of 1-pixels) and tight bbox (x, y, w, h) of a bitmap."""
    bitmap = np.asarray(bitmap) != 0
    area = int(bitmap.sum())
    if area == 0:
        raise ValidationError("mask is empty (area 0)")
    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    x0, x1 = int(cols[0]), int(cols[-1])
    y0, y1 = int(rows[0]), int(rows[-1])
    return area, (x0, y0, x1 - x0 + 1, y1 - y0 + 1)
