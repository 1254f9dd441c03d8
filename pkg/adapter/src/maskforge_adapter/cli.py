"""Standalone adapter command: frames in, interchange files out.

Config is one JSON document:

    {
      "frames_dir": "path/to/frames",          # *.png, stem = frame id
      "out_dir": "path/to/out",
      "prompt_spec": {"grid_points_per_side": 16, "exclude_regions": [...]},
      "model": {"segmenter": "stub", "embedder": "stub", "embedding_dim": 64},
      "crop_policy": "masked-pixels",           # or "bbox-crop"
      "text_prompts": ["sky", "grass"]          # optional prototype export
    }

Outputs masks.jsonl, embeddings.bin, optional text_prototypes.bin, and an
adapter_meta.json sidecar recording backend and granularity choices. Files
are committed atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from maskforge_adapter.backends import build_embedder, build_segmenter
from maskforge_adapter.formats import mask_record, write_embeddings_bin, write_masks_jsonl


def load_config(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    for field in ("frames_dir", "out_dir"):
        if field not in doc:
            raise ValueError(f"config is missing required field {field!r}")
    doc.setdefault("prompt_spec", {"grid_points_per_side": 16})
    doc.setdefault("model", {})
    doc.setdefault("crop_policy", "masked-pixels")
    doc.setdefault("text_prompts", [])
    return doc


def _load_frames(frames_dir: Path) -> list[tuple[str, np.ndarray]]:
    frames = []
    for png in sorted(frames_dir.glob("*.png")):
        with Image.open(png) as img:
            frames.append((png.stem, np.asarray(img.convert("RGB"), dtype=np.uint8)))
    if not frames:
        raise ValueError(f"no PNG frames found in {frames_dir}")
    return frames


def export_masks(config: dict) -> list[dict]:
    frames = _load_frames(Path(config["frames_dir"]))
    segmenter = build_segmenter(config["model"])
    records = []
    index = {}
    for frame_id, pixels in frames:
        bitmaps = segmenter.segment(pixels, config["prompt_spec"])
        ordered = sorted(
            range(len(bitmaps)),
            key=lambda i: (-int(bitmaps[i].sum()), i),
        )
        for seq, i in enumerate(ordered):
            record = mask_record(f"{frame_id}/m{seq:03d}", frame_id, bitmaps[i])
            records.append(record)
            index[record["id"]] = bitmaps[i]
    out = Path(config["out_dir"])
    write_masks_jsonl(records, out / "masks.jsonl")
    config["_mask_bitmaps"] = index  # reused by export_embeddings in one run
    return records


def export_embeddings(config: dict, records: list[dict]) -> int:
    frames = dict(_load_frames(Path(config["frames_dir"])))
    embedder = build_embedder(config["model"], config["crop_policy"])
    bitmaps = config.get("_mask_bitmaps", {})
    ids = []
    rows = []
    for record in sorted(records, key=lambda r: r["id"]):
        bitmap = bitmaps.get(record["id"])
        if bitmap is None:
            bitmap = _decode_rle(record)
        vector = embedder.embed_mask(frames[record["frame_id"]], bitmap)
        ids.append(record["id"])
        rows.append(vector)
    dim = int(config["model"].get("embedding_dim", getattr(embedder, "dim", 64)))
    matrix = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    if matrix.size and matrix.shape[1] != dim:
        raise ValueError(
            f"embedder produced dim {matrix.shape[1]}, config declares {dim}"
        )
    out = Path(config["out_dir"])
    write_embeddings_bin(ids, matrix, out / "embeddings.bin")
    prompts = config.get("text_prompts", [])
    if prompts:
        proto_rows = [embedder.embed_text(token) for token in prompts]
        write_embeddings_bin(
            [f"text:{token}" for token in prompts],
            np.stack(proto_rows),
            out / "text_prototypes.bin",
        )
    return len(ids)


def _decode_rle(record: dict) -> np.ndarray:
    flat = np.zeros(record["width"] * record["height"], dtype=bool)
    pos = 0
    value = False
    for count in record["rle"]:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    return flat.reshape(record["height"], record["width"])


def run(config: dict) -> dict:
    records = export_masks(config)
    count = export_embeddings(config, records)
    meta = {
        "segmenter": config["model"].get("segmenter", "stub"),
        "embedder": config["model"].get("embedder", "stub"),
        "embedding_dim": int(config["model"].get("embedding_dim", 64)),
        "crop_policy": config["crop_policy"],
        "mask_granularity": config["model"].get("granularity", "whole"),
        "masks": len(records),
        "embeddings": count,
    }
    out = Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "adapter_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return meta


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="maskforge-adapter")
    parser.add_argument("--config", required=True, help="adapter config JSON")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        meta = run(config)
    except Exception as exc:
        print(json.dumps({"error": {"code": type(exc).__name__, "message": str(exc)}}),
              file=sys.stderr)
        return 1
    print(json.dumps({"ok": True, **meta}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
