"""Thin out-of-process adapter: runs segmentation and embedding backends over
extracted frames and writes masks.jsonl / embeddings.bin in the maskforge
interchange formats."""

__version__ = "0.1.0"
