"""Domain types, RLE mask codec, manifest schema, and seeding conventions."""

from maskforge.core.manifest import DatasetManifest, SampleEntry
from maskforge.core.rle import mask_stats, rle_decode, rle_encode
from maskforge.core.seeding import derive_seed, rng_for
from maskforge.core.serial import canonical_json, config_hash, load_png, save_png
from maskforge.core.types import (
    Frame,
    MaskRecord,
    TargetExemplar,
    read_masks_jsonl,
    write_masks_jsonl,
)

__all__ = [
    "DatasetManifest",
    "Frame",
    "MaskRecord",
    "SampleEntry",
    "TargetExemplar",
    "canonical_json",
    "config_hash",
    "derive_seed",
    "load_png",
    "mask_stats",
    "read_masks_jsonl",
    "rle_decode",
    "rle_encode",
    "rng_for",
    "save_png",
    "write_masks_jsonl",
]
