"""Independent brute-force oracles used by the test suite.

Everything here is deliberately naive: double loops, full rescans each step,
no shared state with the implementations under test beyond the documented
input formats.
"""

from __future__ import annotations

import numpy as np


def naive_mask_stats(bitmap: np.ndarray) -> tuple[int, tuple[int, int, int, int]]:
    """Double-loop area and tight bbox."""
    h, w = bitmap.shape
    area = 0
    x0, y0, x1, y1 = w, h, -1, -1
    for y in range(h):
        for x in range(w):
            if bitmap[y, x]:
                area += 1
                x0 = min(x0, x)
                y0 = min(y0, y)
                x1 = max(x1, x)
                y1 = max(y1, y)
    return area, (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def naive_rle_decode(counts: list[int], width: int, height: int) -> np.ndarray:
    """Scan-order decode, one pixel at a time."""
    flat = []
    value = 0
    for count in counts:
        flat.extend([value] * count)
        value = 1 - value
    return np.array(flat, dtype=bool).reshape(height, width)


def _linkage_distance(D: np.ndarray, a: list[int], b: list[int], linkage: str) -> float:
    sub = D[np.ix_(a, b)]
    if linkage == "single":
        return float(np.min(sub))
    if linkage == "complete":
        return float(np.max(sub))
    if linkage == "average":
        return float(np.mean(sub))
    raise ValueError(linkage)


def naive_hac(
    ids: list[str], D: np.ndarray, k: int, linkage: str
) -> tuple[dict[str, int], list[tuple[str, str, float]]]:
    """O(N^3) agglomeration: rescan every active cluster pair at every step.

    Same selection rule as the engine: minimum linkage distance, ties broken
    by the pair of cluster min-ids (lexicographic). Returns (assignment,
    merge_tree) with merge tree entries (min_id_a, min_id_b, distance),
    min_id_a < min_id_b.
    """
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    clusters: list[list[int]] = [[i] for i in order]
    tree: list[tuple[str, str, float]] = []
    while len(clusters) > k:
        best = None
        best_key = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                a, b = clusters[i], clusters[j]
                min_a = min(ids[m] for m in a)
                min_b = min(ids[m] for m in b)
                lo, hi = (min_a, min_b) if min_a < min_b else (min_b, min_a)
                # orientation fixed by min-id so mean order matches the engine
                if min_a < min_b:
                    dist = _linkage_distance(D, a, b, linkage)
                else:
                    dist = _linkage_distance(D, b, a, linkage)
                key = (dist, lo, hi)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (i, j, lo, hi, dist)
        i, j, lo, hi, dist = best
        tree.append((lo, hi, dist))
        merged = sorted(clusters[i] + clusters[j])
        clusters = [c for idx, c in enumerate(clusters) if idx not in (i, j)]
        clusters.append(merged)
    clusters.sort(key=lambda c: min(ids[m] for m in c))
    assignment = {}
    for index, members in enumerate(clusters):
        for m in members:
            assignment[ids[m]] = index
    return assignment, tree


def naive_dedup(ids: list[str], vectors: np.ndarray, tau: float) -> list[str]:
    """Pairwise greedy dedup in id order, one dot product at a time."""
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    kept: list[int] = []
    for i in order:
        duplicate = False
        for j in kept:
            if float(np.dot(vectors[i], vectors[j])) >= tau:
                duplicate = True
                break
        if not duplicate:
            kept.append(i)
    return [ids[i] for i in kept]


def naive_composite_over(
    target: np.ndarray, patch: np.ndarray, bitmap: np.ndarray, offset: tuple[int, int]
) -> np.ndarray:
    """Per-pixel 2-case rule: bitmap pixel wins, target elsewhere."""
    out = target.copy()
    dx, dy = offset
    h, w = bitmap.shape
    fh, fw = target.shape[:2]
    for y in range(h):
        for x in range(w):
            ty, tx = y + dy, x + dx
            if 0 <= ty < fh and 0 <= tx < fw and bitmap[y, x]:
                out[ty, tx] = patch[y, x]
    return out


def naive_composite_under(
    target: np.ndarray,
    prior: np.ndarray,
    patch: np.ndarray,
    bitmap: np.ndarray,
    offset: tuple[int, int],
) -> np.ndarray:
    """Per-pixel 3-case rule: prior wins, then bitmap, then target."""
    out = target.copy()
    dx, dy = offset
    h, w = bitmap.shape
    fh, fw = target.shape[:2]
    for y in range(h):
        for x in range(w):
            ty, tx = y + dy, x + dx
            if 0 <= ty < fh and 0 <= tx < fw and bitmap[y, x] and not prior[ty, tx]:
                out[ty, tx] = patch[y, x]
    return out


def naive_confusion(scores, labels, threshold) -> tuple[int, int, int, int]:
    """Loop recount of (tp, fp, fn, tn) with predicted positive iff score >= t."""
    tp = fp = fn = tn = 0
    for s, y in zip(scores, labels):
        pred = 1 if s >= threshold else 0
        if pred == 1 and y == 1:
            tp += 1
        elif pred == 1 and y == 0:
            fp += 1
        elif pred == 0 and y == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def finite_difference_grad(loss_fn, params: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar loss over a flat parameter vector."""
    grad = np.zeros_like(params, dtype=np.float64)
    for i in range(params.size):
        bump = np.zeros_like(params)
        bump[i] = eps
        grad[i] = (loss_fn(params + bump) - loss_fn(params - bump)) / (2 * eps)
    return grad
