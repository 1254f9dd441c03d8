"""Deterministic seed derivation.

All randomness in the engine flows from a single 64-bit root seed. Each stage
derives its own seed by hashing the root together with a stage label (plus any
per-item labels such as mask or frame ids), so results are independent of
scheduling and worker count.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *labels: object) -> int:
    """Derive a 64-bit seed from the root seed and a sequence of labels."""
    h = hashlib.sha256()
    h.update(struct.pack("<Q", root & _MASK64))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(root: int, *labels: object) -> np.random.Generator:
    """A fresh generator seeded from ``derive_seed(root, *labels)``."""
    return np.random.default_rng(derive_seed(root, *labels))
