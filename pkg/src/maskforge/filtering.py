"""Filtering stage over mask embeddings.

Hierarchical agglomerative clustering under cosine distance with fully
deterministic tie-breaking, a silhouette heuristic for picking k,
cluster-balanced resampling, greedy near-duplicate removal, text-prompt
filtering, label histograms, and the composed pipeline that chains them in
the fixed order text -> dedup -> cluster -> resample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from maskforge.core.seeding import rng_for
from maskforge.core.types import MaskRecord
from maskforge.embedding import EmbeddingMatrix, pairwise_cosine_distance
from maskforge.errors import ParameterError, ValidationError

LINKAGES = ("single", "complete", "average")

DROP = "drop"
KEEP = "keep"


@dataclass(frozen=True)
class ClusterAssignment:
    """k clusters over mask ids plus the full merge history.

    Merge tree entries are (min_id_a, min_id_b, distance) with
    min_id_a < min_id_b: each cluster is named by its lexicographically
    smallest member id at merge time. Cluster indices are assigned by
    smallest-member-id order.
    """

    k: int
    assignment: dict[str, int]
    merge_tree: tuple[tuple[str, str, float], ...]

    def __post_init__(self) -> None:
        n = len(self.assignment)
        if len(self.merge_tree) != n - self.k:
            raise ValidationError(
                f"merge tree length {len(self.merge_tree)} != N - k = {n - self.k}"
            )
        used = set(self.assignment.values())
        if used and (min(used) < 0 or max(used) >= self.k):
            raise ValidationError("cluster indices out of range")

    def members(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.k)]
        for mask_id in sorted(self.assignment):
            out[self.assignment[mask_id]].append(mask_id)
        return out


@dataclass(frozen=True)
class TextPrompt:
    text: str
    mode: str
    tau: float

    def __post_init__(self) -> None:
        if self.mode not in (DROP, KEEP):
            raise ParameterError(f"prompt mode must be drop or keep, got {self.mode!r}")
        if not -1.0 <= self.tau <= 1.0:
            raise ParameterError(f"prompt tau must be in [-1, 1], got {self.tau}")


@dataclass(frozen=True)
class FilterConfig:
    k: int | str = "auto"
    k_min: int = 2
    k_max: int = 100
    linkage: str = "average"
    per_cluster_quota: int | None = 50
    dedup_tau: float | None = 0.98
    text_prompts: tuple[TextPrompt, ...] = ()
    stage_seed: int = 0

    def __post_init__(self) -> None:
        if self.linkage not in LINKAGES:
            raise ParameterError(f"linkage must be one of {LINKAGES}, got {self.linkage!r}")
        if self.per_cluster_quota is not None and self.per_cluster_quota < 1:
            raise ParameterError("per_cluster_quota must be >= 1")
        if self.dedup_tau is not None and not -1.0 <= self.dedup_tau <= 1.0:
            raise ParameterError(f"dedup_tau must be in [-1, 1], got {self.dedup_tau}")
        if isinstance(self.k, str) and self.k != "auto":
            raise ParameterError(f"k must be an integer or 'auto', got {self.k!r}")

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "linkage": self.linkage,
            "per_cluster_quota": self.per_cluster_quota,
            "dedup_tau": self.dedup_tau,
            "text_prompts": [
                {"text": p.text, "mode": p.mode, "tau": p.tau} for p in self.text_prompts
            ],
            "stage_seed": self.stage_seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FilterConfig":
        return cls(
            k=doc.get("k", "auto"),
            k_min=int(doc.get("k_min", 2)),
            k_max=int(doc.get("k_max", 100)),
            linkage=str(doc.get("linkage", "average")),
            per_cluster_quota=doc.get("per_cluster_quota", 50),
            dedup_tau=doc.get("dedup_tau", 0.98),
            text_prompts=tuple(
                TextPrompt(str(p["text"]), str(p["mode"]), float(p["tau"]))
                for p in doc.get("text_prompts", [])
            ),
            stage_seed=int(doc.get("stage_seed", 0)),
        )


# ---------------------------------------------------------------------------
# HAC

def _oriented_reduce(
    D: np.ndarray, a: list[int], b: list[int], a_min: str, b_min: str, linkage: str
) -> float:
    # row block belongs to the cluster with the smaller min id, so the mean
    # visits elements in the same order as the brute-force reference
    if a_min < b_min:
        sub = D[np.ix_(a, b)]
    else:
        sub = D[np.ix_(b, a)]
    if linkage == "single":
        return float(np.min(sub))
    if linkage == "complete":
        return float(np.max(sub))
    return float(np.mean(sub))


def _merge_sequence(
    matrix: EmbeddingMatrix,
    k_stop: int,
    linkage: str,
    snapshot_at: set[int] | None = None,
) -> tuple[
    list[str],
    list[tuple[str, str, float]],
    dict[str, int] | None,
    dict[int, dict[str, int]],
]:
    """Run agglomeration down to k_stop clusters.

    Returns (sorted ids, merge tree, final assignment, snapshots) where
    snapshots holds the assignment captured at each cluster count requested in
    ``snapshot_at``.
    """
    ids = sorted(matrix.ids)
    n = len(ids)
    matrix = matrix.subset(ids)
    D = pairwise_cosine_distance(matrix)

    members: list[list[int] | None] = [[i] for i in range(n)]
    min_ids: list[str | None] = list(ids)
    alive = np.ones(n, dtype=bool)
    C = np.full((n, n), np.inf)
    iu = np.triu_indices(n, 1)
    C[iu] = D[iu]
    C[(iu[1], iu[0])] = D[iu]

    def take_snapshot() -> dict[str, int]:
        live = sorted((h for h in range(n) if alive[h]), key=lambda h: min_ids[h])
        snap: dict[str, int] = {}
        for index, handle in enumerate(live):
            for m in members[handle]:
                snap[ids[m]] = index
        return snap

    snapshots: dict[int, dict[str, int]] = {}
    snapshot_at = snapshot_at or set()
    tree: list[tuple[str, str, float]] = []
    active = n
    if active in snapshot_at:
        snapshots[active] = take_snapshot()

    while active > k_stop:
        dmin = C.min()
        rows, cols = np.nonzero(C == dmin)
        best = None
        for r, c in zip(rows, cols):
            if r >= c:
                continue
            lo, hi = sorted((min_ids[r], min_ids[c]))
            key = (lo, hi)
            if best is None or key < best[0]:
                best = (key, r, c)
        (lo, hi), r, c = best
        keep, drop = (r, c) if min_ids[r] < min_ids[c] else (c, r)
        dist = float(dmin)
        tree.append((lo, hi, dist))

        members[keep] = sorted(members[keep] + members[drop])
        members[drop] = None
        min_ids[drop] = None
        alive[drop] = False
        C[drop, :] = np.inf
        C[:, drop] = np.inf
        for other in range(n):
            if other == keep or not alive[other]:
                continue
            value = _oriented_reduce(
                D, members[keep], members[other], min_ids[keep], min_ids[other], linkage
            )
            C[keep, other] = value
            C[other, keep] = value
        active -= 1
        if active in snapshot_at:
            snapshots[active] = take_snapshot()

    final = take_snapshot() if active == k_stop else None
    return ids, tree, final, snapshots


def hac_cluster(matrix: EmbeddingMatrix, k: int, linkage: str = "average") -> ClusterAssignment:
    """Agglomerate singletons under cosine distance until k clusters remain."""
    n = len(matrix)
    if linkage not in LINKAGES:
        raise ParameterError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    _, tree, assignment, _ = _merge_sequence(matrix, k, linkage)
    return ClusterAssignment(k=k, assignment=assignment, merge_tree=tuple(tree))


def _mean_silhouette(D: np.ndarray, labels: np.ndarray, k: int) -> float:
    n = len(labels)
    clusters = [np.flatnonzero(labels == c) for c in range(k)]
    sums = np.stack([D[:, m].sum(axis=1) for m in clusters], axis=1)  # (n, k)
    sizes = np.array([len(m) for m in clusters])
    scores = np.zeros(n)
    for i in range(n):
        c = labels[i]
        if sizes[c] <= 1:
            continue
        a = sums[i, c] / (sizes[c] - 1)
        other = [sums[i, q] / sizes[q] for q in range(k) if q != c]
        b = min(other)
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return float(scores.mean())


def select_k(matrix: EmbeddingMatrix, k_min: int, k_max: int) -> int:
    """k in [k_min, k_max] maximizing mean silhouette; ties go to smallest k."""
    n = len(matrix)
    if n < 3:
        raise ParameterError(f"need at least 3 points to select k, got {n}")
    if not 2 <= k_min <= k_max <= n:
        raise ParameterError(f"require 2 <= k_min <= k_max <= N, got [{k_min}, {k_max}], N={n}")
    wanted = set(range(k_min, k_max + 1))
    ids, _, _, snapshots = _merge_sequence(matrix, k_min, "average", snapshot_at=wanted)
    D = pairwise_cosine_distance(matrix.subset(sorted(matrix.ids)))
    id_pos = {mask_id: i for i, mask_id in enumerate(ids)}
    best_k = None
    best_score = -np.inf
    for k in sorted(wanted):
        snap = snapshots[k]
        labels = np.zeros(len(ids), dtype=int)
        for mask_id, cluster in snap.items():
            labels[id_pos[mask_id]] = cluster
        score = _mean_silhouette(D, labels, k)
        if score > best_score:
            best_score = score
            best_k = k
    return best_k


# ---------------------------------------------------------------------------
# resampling, dedup, text filtering

def resample_balanced(assignment: ClusterAssignment, quota: int, seed: int) -> list[str]:
    """min(quota, size) masks per cluster, sampled without replacement."""
    if quota < 1:
        raise ParameterError(f"quota must be >= 1, got {quota}")
    selected: list[str] = []
    for index, members in enumerate(assignment.members()):
        if len(members) <= quota:
            selected.extend(members)
            continue
        rng = rng_for(seed, "resample", index)
        picks = rng.choice(len(members), size=quota, replace=False)
        selected.extend(members[p] for p in sorted(picks))
    return sorted(selected)


def deduplicate(matrix: EmbeddingMatrix, tau: float) -> list[str]:
    """Greedy scan in id order; drop anything >= tau similar to a kept mask.

    tau above 1 is unreachable and keeps everything.
    """
    ids = sorted(matrix.ids)
    data = matrix.subset(ids).data.astype(np.float64)
    kept_rows = np.empty_like(data)
    kept_ids: list[str] = []
    count = 0
    for i, mask_id in enumerate(ids):
        if count:
            sims = kept_rows[:count] @ data[i]
            if float(sims.max()) >= tau:
                continue
        kept_rows[count] = data[i]
        count += 1
        kept_ids.append(mask_id)
    return kept_ids


def text_filter(
    matrix: EmbeddingMatrix,
    prompt_vectors: Sequence[np.ndarray],
    mode: str,
    tau: float,
) -> list[str]:
    """Keep or drop masks by max similarity against a prompt set."""
    if len(prompt_vectors) == 0:
        raise ParameterError("prompt list is empty")
    if mode not in (DROP, KEEP):
        raise ParameterError(f"mode must be drop or keep, got {mode!r}")
    ids = sorted(matrix.ids)
    data = matrix.subset(ids).data.astype(np.float64)
    P = np.stack([np.asarray(p, dtype=np.float64) for p in prompt_vectors])
    if P.shape[1] != data.shape[1]:
        raise ParameterError(f"prompt dim {P.shape[1]} != embedding dim {data.shape[1]}")
    scores = (data @ P.T).max(axis=1) if len(ids) else np.zeros(0)
    if mode == DROP:
        kept = [mask_id for mask_id, s in zip(ids, scores) if s < tau]
    else:
        kept = [mask_id for mask_id, s in zip(ids, scores) if s >= tau]
    return kept


def histogram(labels: Iterable[str | None] | ClusterAssignment) -> list[tuple[str, int]]:
    """(label, count) pairs, counts descending, ties broken by label."""
    if isinstance(labels, ClusterAssignment):
        values = [str(c) for c in labels.assignment.values()]
    else:
        values = [lab if lab is not None else "unlabeled" for lab in labels]
    counts: dict[str, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------------------
# composed pipeline

@dataclass
class StageReport:
    name: str
    kept: int
    dropped: int
    histogram: list[tuple[str, int]]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kept": self.kept,
            "dropped": self.dropped,
            "histogram": [[label, count] for label, count in self.histogram],
        }


@dataclass
class FilterResult:
    kept_ids: list[str]
    assignment: ClusterAssignment | None
    stages: list[StageReport]
    k_used: int | None

    def report_json(self) -> dict:
        return {
            "stages": [s.to_json() for s in self.stages],
            "k_used": self.k_used,
            "final_count": len(self.kept_ids),
        }


def run_filter_pipeline(
    masks: Sequence[MaskRecord],
    matrix: EmbeddingMatrix,
    config: FilterConfig,
    prompt_provider: Callable[[str], object] | None = None,
) -> FilterResult:
    """Apply text filters, dedup, clustering, and balanced resampling in order."""
    labels_by_id = {m.id: m.label for m in masks}
    mask_ids = sorted(labels_by_id)
    matrix_ids = set(matrix.ids)
    if set(mask_ids) != matrix_ids:
        missing = sorted(set(mask_ids) ^ matrix_ids)[:5]
        raise ValidationError(f"mask/embedding id mismatch, e.g. {missing}")

    def stage_histogram(ids: Sequence[str]) -> list[tuple[str, int]]:
        return histogram(labels_by_id[i] for i in ids)

    surviving = list(mask_ids)
    stages = [StageReport("input", len(surviving), 0, stage_histogram(surviving))]

    if config.text_prompts and prompt_provider is None:
        from maskforge.embedding import synthetic_text_embed

        prompt_provider = synthetic_text_embed
    for prompt in config.text_prompts:
        record = prompt_provider(prompt.text)
        sub = matrix.subset(surviving)
        kept = text_filter(sub, [record.vector], prompt.mode, prompt.tau)
        stages.append(
            StageReport(
                f"text_filter:{prompt.mode}:{prompt.text}",
                len(kept),
                len(surviving) - len(kept),
                stage_histogram(kept),
            )
        )
        surviving = kept

    if config.dedup_tau is not None and surviving:
        kept = deduplicate(matrix.subset(surviving), config.dedup_tau)
        stages.append(
            StageReport("dedup", len(kept), len(surviving) - len(kept), stage_histogram(kept))
        )
        surviving = kept

    assignment = None
    k_used = None
    if surviving:
        sub = matrix.subset(surviving)
        if config.k == "auto":
            if len(surviving) >= 3 and len(surviving) > config.k_min:
                k_used = select_k(
                    sub, config.k_min, min(config.k_max, len(surviving))
                )
            else:
                k_used = len(surviving)
        else:
            k_used = min(int(config.k), len(surviving))
        assignment = hac_cluster(sub, k_used, config.linkage)
        stages.append(
            StageReport(f"cluster:k={k_used}", len(surviving), 0, stage_histogram(surviving))
        )
        if config.per_cluster_quota is not None:
            kept = resample_balanced(assignment, config.per_cluster_quota, config.stage_seed)
            stages.append(
                StageReport(
                    "resample",
                    len(kept),
                    len(surviving) - len(kept),
                    stage_histogram(kept),
                )
            )
            surviving = kept

    return FilterResult(
        kept_ids=sorted(surviving),
        assignment=assignment,
        stages=stages,
        k_used=k_used,
    )
