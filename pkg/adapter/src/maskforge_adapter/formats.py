"""Writers for the maskforge interchange formats.

Implemented from the documented byte/JSON layouts; this package never imports
the engine. RLE is row-major with alternating background/foreground runs,
starting with the background run (possibly 0). embeddings.bin is magic MFEB,
version u16, dim u32, count u32, count*dim float32 rows, then length-prefixed
UTF-8 ids, all little-endian.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np


def rle_encode(bitmap: np.ndarray) -> list[int]:
    flat = (np.asarray(bitmap).ravel() != 0).astype(np.int8)
    boundaries = np.flatnonzero(np.diff(flat))
    edges = np.concatenate(([0], boundaries + 1, [flat.size]))
    counts = [int(c) for c in np.diff(edges)]
    if flat[0] == 1:
        counts.insert(0, 0)
    return counts


def mask_record(mask_id: str, frame_id: str, bitmap: np.ndarray,
                label: str | None = None) -> dict:
    bitmap = np.asarray(bitmap) != 0
    area = int(bitmap.sum())
    if area == 0:
        raise ValueError(f"mask {mask_id} is empty")
    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    record = {
        "id": mask_id,
        "frame_id": frame_id,
        "width": int(bitmap.shape[1]),
        "height": int(bitmap.shape[0]),
        "rle": rle_encode(bitmap),
        "bbox": [int(cols[0]), int(rows[0]),
                 int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)],
        "area": area,
    }
    if label is not None:
        record["label"] = label
    return record


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_masks_jsonl(records: list[dict], path: str | Path) -> None:
    lines = [json.dumps(record, sort_keys=True) for record in records]
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def write_embeddings_bin(ids: list[str], matrix: np.ndarray, path: str | Path) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    count, dim = matrix.shape if matrix.size else (0, matrix.shape[1])
    if len(ids) != count:
        raise ValueError(f"{len(ids)} ids for {count} rows")
    blob = bytearray()
    blob += b"MFEB"
    blob += struct.pack("<HII", 1, dim, count)
    blob += matrix.tobytes()
    for record_id in ids:
        encoded = record_id.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
    _atomic_write(Path(path), bytes(blob))
