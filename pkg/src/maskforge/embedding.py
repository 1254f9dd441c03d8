"""Embedding provider boundary.

Cosine geometry, the embeddings.bin interchange format, and deterministic
synthetic image/text embedders that form a coherent joint space for
desk-scale runs. The synthetic image embedder is a 24-bin RGB histogram over
masked pixels plus 4 shape features, projected to EMBED_DIM by a fixed seeded
matrix and unit-normalized. Text prototypes are means of image embeddings over
canonical exemplar renders, so text and mask vectors live in one stable space.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from maskforge.core.seeding import rng_for
from maskforge.core.types import Frame, MaskRecord
from maskforge.errors import FormatError, ParameterError, ValidationError

EMBED_DIM = 64
_MAGIC = b"MFEB"
_VERSION = 1
_UNIT_TOL = 1e-5

# Fixed constant seed for the projection matrix: the synthetic space must be
# identical across runs or stored text prototypes would drift away from mask
# embeddings.
_SPACE_SEED = 0x6D666F72_6765      # "mfor""ge"
_RAW_FEATURES = 28                 # 24 histogram bins + 4 shape features
_SHAPE_WEIGHT = 1.0


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """A unit-norm vector tied to a mask id or a ``text:<prompt>`` id."""

    id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValidationError(f"embedding {self.id}: norm {norm} not within {_UNIT_TOL} of 1")

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass(eq=False)
class EmbeddingMatrix:
    """Ordered id list plus a row-major float32 matrix, one unit-norm row per id."""

    ids: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        if len(self.ids) != self.data.shape[0]:
            raise ValidationError(
                f"id count {len(self.ids)} != row count {self.data.shape[0]}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("duplicate ids in embedding matrix")
        if self.data.size:
            norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > _UNIT_TOL)
            if bad.size:
                raise ValidationError(
                    f"{bad.size} row(s) not unit-norm, first offender {self.ids[bad[0]]!r}"
                )

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, record_id: str) -> np.ndarray:
        return self.data[self.index(record_id)]

    def index(self, record_id: str) -> int:
        try:
            return self._index[record_id]
        except AttributeError:
            object.__setattr__(self, "_index", {i: n for n, i in enumerate(self.ids)})
            return self._index[record_id]

    def subset(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        rows = [self.index(i) for i in ids]
        return EmbeddingMatrix(ids=tuple(ids), data=self.data[rows].copy())

    @classmethod
    def from_records(cls, records: Iterable[EmbeddingRecord]) -> "EmbeddingMatrix":
        records = list(records)
        if not records:
            return cls(ids=(), data=np.zeros((0, EMBED_DIM), dtype=np.float32))
        dims = {r.dim for r in records}
        if len(dims) != 1:
            raise ValidationError(f"mixed embedding dims {sorted(dims)}")
        return cls(
            ids=tuple(r.id for r in records),
            data=np.stack([r.vector for r in records]).astype(np.float32),
        )


def unit_normalize(vector: np.ndarray) -> np.ndarray:
    """Rescale to unit L2 norm; rejects the zero vector."""
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValidationError("cannot normalize a zero or non-finite vector")
    return (v / norm).astype(np.float32)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit-norm vectors; distance is 1 - similarity."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ParameterError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


def pairwise_cosine_distance(matrix: EmbeddingMatrix) -> np.ndarray:
    """Symmetric (N, N) matrix of 1 - cosine similarity, zero diagonal.

    Both the clustering engine and its brute-force test oracle consume this
    one matrix, so their recorded merge distances compare bit-exactly.
    """
    data = matrix.data.astype(np.float64)
    gram = data @ data.T
    gram = (gram + gram.T) / 2.0
    dist = 1.0 - gram
    np.fill_diagonal(dist, 0.0)
    return dist


def _projection_matrix() -> np.ndarray:
    # orthonormal columns (unique-sign QR) so projection preserves cosines;
    # a plain Gaussian matrix adds cross-term noise at the margin scale
    rng = rng_for(_SPACE_SEED, "projection")
    gaussian = rng.standard_normal((EMBED_DIM, _RAW_FEATURES))
    q, r = np.linalg.qr(gaussian)
    return q * np.sign(np.diag(r))


_PROJECTION = _projection_matrix()


def _raw_features(frame: Frame, bitmap: np.ndarray) -> np.ndarray:
    area = int(bitmap.sum())
    if area == 0:
        raise ValidationError("cannot embed an empty mask")
    pixels = frame.pixels[bitmap]
    hist = np.zeros(24, dtype=np.float64)
    # soft linear binning: each pixel splits mass between its two nearest bin
    # centers, so small lighting shifts move the histogram smoothly
    position = pixels.astype(np.float64) / 32.0 - 0.5
    left = np.floor(position).astype(np.int64)
    frac = position - left
    for channel in range(3):
        lo = np.clip(left[:, channel], 0, 7)
        hi = np.clip(left[:, channel] + 1, 0, 7)
        hist[channel * 8 : channel * 8 + 8] += np.bincount(
            lo, weights=1.0 - frac[:, channel], minlength=8
        )
        hist[channel * 8 : channel * 8 + 8] += np.bincount(
            hi, weights=frac[:, channel], minlength=8
        )
    # Hellinger form: sqrt stabilizes bin-mass variance so cross-category
    # prototype similarities stay balanced across hues
    hist = np.sqrt(hist / area)

    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    bw = int(cols[-1] - cols[0] + 1)
    bh = int(rows[-1] - rows[0] + 1)
    area_fraction = min(1.0, 5.0 * area / (frame.width * frame.height))
    aspect = bw / (bw + bh)
    fill = area / (bw * bh)
    interior = (
        bitmap[1:-1, 1:-1]
        & bitmap[:-2, 1:-1]
        & bitmap[2:, 1:-1]
        & bitmap[1:-1, :-2]
        & bitmap[1:-1, 2:]
    )
    boundary = area - int(interior.sum())
    boundary_fraction = min(1.0, boundary / area)
    shape = np.array([area_fraction, aspect, fill, boundary_fraction]) * _SHAPE_WEIGHT
    return np.concatenate([hist, shape])


def synthetic_image_embed(frame: Frame, mask: MaskRecord) -> EmbeddingRecord:
    """Deterministic surrogate image embedding of one masked region."""
    if mask.frame_id != frame.id:
        raise ParameterError(f"mask {mask.id} belongs to frame {mask.frame_id}, not {frame.id}")
    return embed_bitmap(mask.id, frame, mask.decode())


def embed_bitmap(record_id: str, frame: Frame, bitmap: np.ndarray) -> EmbeddingRecord:
    """Embed an arbitrary bitmap region of ``frame`` (used for crop priors too)."""
    raw = _raw_features(frame, bitmap)
    projected = _PROJECTION @ raw
    return EmbeddingRecord(id=record_id, vector=unit_normalize(projected))


def synthetic_text_embed(token: str) -> EmbeddingRecord:
    """Prototype vector for a vocabulary token: mean of its exemplar embeddings."""
    from maskforge import fixtures  # deferred: fixtures renders the exemplars

    exemplars = fixtures.canonical_exemplars(token)
    vectors = [
        synthetic_image_embed(frame, mask).vector.astype(np.float64)
        for frame, mask in exemplars
    ]
    mean = np.mean(vectors, axis=0)
    return EmbeddingRecord(id=f"text:{token}", vector=unit_normalize(mean))


def store_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary interchange file (magic MFEB, little-endian throughout)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = matrix.dim if len(matrix) else EMBED_DIM
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HII", _VERSION, dim, len(matrix)))
        fh.write(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())
        for record_id in matrix.ids:
            encoded = record_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read and validate an embeddings.bin file; checks byte counts and norms."""
    blob = Path(path).read_bytes()
    if len(blob) < 14:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
    version, dim, count = struct.unpack_from("<HII", blob, 4)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {_VERSION}")
    offset = 14
    payload = count * dim * 4
    if len(blob) < offset + payload:
        raise FormatError(
            f"{path}: truncated payload, expected {offset + payload} bytes before the "
            f"id index, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
    offset += payload
    ids = []
    for i in range(count):
        if len(blob) < offset + 4:
            raise FormatError(f"{path}: truncated id index at record {i}")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if len(blob) < offset + length:
            raise FormatError(f"{path}: truncated id string at record {i}")
        ids.append(blob[offset : offset + length].decode("utf-8"))
        offset += length
    return EmbeddingMatrix(ids=tuple(ids), data=data.copy())
