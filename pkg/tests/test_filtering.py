import numpy as np
import pytest

from maskforge import fixtures
from maskforge.core.types import MaskRecord
from maskforge.embedding import (
    EmbeddingMatrix,
    EmbeddingRecord,
    pairwise_cosine_distance,
    synthetic_image_embed,
    synthetic_text_embed,
    unit_normalize,
)
from maskforge.errors import ParameterError
from maskforge.filtering import (
    ClusterAssignment,
    FilterConfig,
    TextPrompt,
    deduplicate,
    hac_cluster,
    histogram,
    resample_balanced,
    run_filter_pipeline,
    select_k,
    text_filter,
)
from tests.reference import naive_dedup, naive_hac


def random_matrix(rng, n, dim=8, prefix="m"):
    return EmbeddingMatrix.from_records(
        [EmbeddingRecord(f"{prefix}{i:03d}", unit_normalize(rng.standard_normal(dim)))
         for i in range(n)]
    )


def blob_matrix(rng, centers, per_blob, spread=0.05, dim=16):
    records = []
    protos = [unit_normalize(rng.standard_normal(dim)).astype(np.float64) for _ in range(centers)]
    for b, proto in enumerate(protos):
        for i in range(per_blob):
            v = proto + spread * rng.standard_normal(dim)
            records.append(EmbeddingRecord(f"b{b}x{i:03d}", unit_normalize(v)))
    return EmbeddingMatrix.from_records(records)


class TestHac:
    def test_k_equals_n_all_singletons(self):
        matrix = random_matrix(np.random.default_rng(0), 8)
        result = hac_cluster(matrix, 8)
        assert result.merge_tree == ()
        assert sorted(result.assignment.values()) == list(range(8))

    def test_k_one_single_cluster(self):
        matrix = random_matrix(np.random.default_rng(0), 8)
        result = hac_cluster(matrix, 1)
        assert set(result.assignment.values()) == {0}
        assert len(result.merge_tree) == 7

    def test_k_out_of_range(self):
        matrix = random_matrix(np.random.default_rng(0), 5)
        with pytest.raises(ParameterError):
            hac_cluster(matrix, 6)
        with pytest.raises(ParameterError):
            hac_cluster(matrix, 0)

    @pytest.mark.parametrize("linkage", ["single", "complete", "average"])
    def test_oracle_equivalence(self, linkage):
        # brute-force O(N^3) reference over the shared distance matrix
        for seed in range(8):
            rng = np.random.default_rng(1000 + seed)
            n = int(rng.integers(5, 33))
            k = int(rng.integers(1, n + 1))
            matrix = random_matrix(rng, n)
            mine = hac_cluster(matrix, k, linkage)
            ids = sorted(matrix.ids)
            D = pairwise_cosine_distance(matrix.subset(ids))
            expected_assignment, expected_tree = naive_hac(ids, D, k, linkage)
            assert mine.assignment == expected_assignment
            assert list(mine.merge_tree) == expected_tree

    def test_tree_consistency_k_minus_one(self):
        matrix = random_matrix(np.random.default_rng(5), 20)
        for k in (10, 5, 2):
            a = hac_cluster(matrix, k)
            b = hac_cluster(matrix, k - 1)
            assert list(b.merge_tree[: len(a.merge_tree)]) == list(a.merge_tree)
            assert len(b.merge_tree) == len(a.merge_tree) + 1

    def test_input_order_irrelevant(self):
        rng = np.random.default_rng(6)
        matrix = random_matrix(rng, 12)
        shuffled_ids = list(matrix.ids)
        rng.shuffle(shuffled_ids)
        shuffled = matrix.subset(shuffled_ids)
        assert hac_cluster(matrix, 4) == hac_cluster(shuffled, 4)


class TestSelectK:
    def test_two_blobs(self):
        matrix = blob_matrix(np.random.default_rng(7), centers=2, per_blob=12)
        assert select_k(matrix, 2, 10) == 2

    def test_three_blobs(self):
        matrix = blob_matrix(np.random.default_rng(8), centers=3, per_blob=10)
        assert select_k(matrix, 2, 10) == 3

    def test_degenerate_range(self):
        matrix = blob_matrix(np.random.default_rng(9), centers=2, per_blob=5)
        assert select_k(matrix, 4, 4) == 4

    def test_too_few_points(self):
        matrix = random_matrix(np.random.default_rng(10), 2)
        with pytest.raises(ParameterError):
            select_k(matrix, 2, 2)


class TestResample:
    def _assignment(self, sizes):
        assignment = {}
        counter = 0
        for cluster, size in enumerate(sizes):
            for _ in range(size):
                assignment[f"m{counter:03d}"] = cluster
                counter += 1
        return ClusterAssignment(
            k=len(sizes), assignment=assignment,
            merge_tree=tuple(("a", "b", 0.0) for _ in range(counter - len(sizes))),
        )

    def test_all_kept_when_under_quota(self):
        assignment = self._assignment([3, 2, 4])
        assert resample_balanced(assignment, 5, seed=1) == sorted(assignment.assignment)

    def test_quota_caps_output(self):
        assignment = self._assignment([30, 40, 5])
        kept = resample_balanced(assignment, 10, seed=1)
        assert len(kept) == 10 + 10 + 5
        counts = {}
        for mask_id in kept:
            cluster = assignment.assignment[mask_id]
            counts[cluster] = counts.get(cluster, 0) + 1
        assert counts == {0: 10, 1: 10, 2: 5}

    def test_subset_and_seed_invariance(self):
        assignment = self._assignment([20, 20])
        a = resample_balanced(assignment, 7, seed=42)
        b = resample_balanced(assignment, 7, seed=42)
        assert a == b
        assert set(a) <= set(assignment.assignment)
        assert resample_balanced(assignment, 7, seed=43) != a

    def test_quota_validation(self):
        with pytest.raises(ParameterError):
            resample_balanced(self._assignment([2]), 0, seed=1)


class TestDedup:
    def test_exact_duplicates_removed_keeper_lowest_id(self):
        base = np.eye(4, dtype=np.float32)
        records = [
            EmbeddingRecord("m002", base[0]),
            EmbeddingRecord("m000", base[0]),
            EmbeddingRecord("m001", base[1]),
        ]
        kept = deduplicate(EmbeddingMatrix.from_records(records), tau=1.0)
        assert kept == ["m000", "m001"]

    def test_unreachable_tau_keeps_all(self):
        matrix = random_matrix(np.random.default_rng(3), 10)
        assert deduplicate(matrix, tau=1.5) == sorted(matrix.ids)

    def test_against_pairwise_oracle(self):
        for seed in range(6):
            rng = np.random.default_rng(200 + seed)
            matrix = random_matrix(rng, 40, dim=4)
            tau = float(rng.uniform(0.2, 0.95))
            assert deduplicate(matrix, tau) == naive_dedup(list(matrix.ids), matrix.data.astype(np.float64), tau)


class TestTextFilter:
    @pytest.fixture(scope="class")
    def corpus(self):
        cfg = fixtures.SceneConfig(seed=13, object_count_range=(1, 2))
        scenes, _ = fixtures.gen_corpus(cfg, 25)
        records, labels = [], {}
        for frame, truth in scenes:
            for mask in truth.masks:
                records.append(synthetic_image_embed(frame, mask))
                labels[mask.id] = mask.label
        return EmbeddingMatrix.from_records(records), labels

    def test_drop_sky_removes_all_sky_keeps_sprites(self, corpus):
        matrix, labels = corpus
        proto = synthetic_text_embed("sky")
        sky = [i for i in matrix.ids if labels[i] == "sky"]
        sprites = [i for i in matrix.ids if labels[i] not in ("sky", "path", "tree")]
        sims = {i: float(np.dot(matrix.row(i), proto.vector)) for i in matrix.ids}
        tau = (min(sims[i] for i in sky) + max(sims[i] for i in sprites)) / 2
        kept = text_filter(matrix, [proto.vector], "drop", tau)
        assert not set(kept) & set(sky)
        assert set(sprites) <= set(kept)

    def test_keep_mode_tau_minus_one_keeps_all(self, corpus):
        matrix, _ = corpus
        proto = synthetic_text_embed("tree")
        kept = text_filter(matrix, [proto.vector], "keep", -1.0)
        assert kept == sorted(matrix.ids)

    def test_drop_mode_tau_minus_one_drops_all(self, corpus):
        matrix, _ = corpus
        proto = synthetic_text_embed("tree")
        assert text_filter(matrix, [proto.vector], "drop", -1.0) == []

    def test_partition_property(self, corpus):
        matrix, _ = corpus
        proto = synthetic_text_embed("path")
        for tau in (-0.5, 0.0, 0.5, 0.9):
            kept = set(text_filter(matrix, [proto.vector], "keep", tau))
            dropped = set(text_filter(matrix, [proto.vector], "drop", tau))
            assert kept | dropped == set(matrix.ids)
            assert not kept & dropped

    def test_empty_prompts_rejected(self, corpus):
        matrix, _ = corpus
        with pytest.raises(ParameterError):
            text_filter(matrix, [], "drop", 0.5)


class TestHistogram:
    def test_empty(self):
        assert histogram([]) == []

    def test_counts_and_tie_order(self):
        assert histogram(["a", "a", "b"]) == [("a", 2), ("b", 1)]
        assert histogram(["b", "a"]) == [("a", 1), ("b", 1)]

    def test_matches_generator_bookkeeping(self):
        cfg = fixtures.SceneConfig(seed=30)
        scenes, expected = fixtures.gen_corpus(cfg, 50)
        labels = [m.label for _, t in scenes for m in t.masks]
        assert histogram(labels) == expected


class TestPipeline:
    @pytest.fixture(scope="class")
    def corpus(self):
        cfg = fixtures.SceneConfig(seed=13, object_count_range=(1, 2))
        scenes, _ = fixtures.gen_corpus(cfg, 30)
        masks, records = [], []
        for frame, truth in scenes:
            for mask in truth.masks:
                masks.append(mask)
                records.append(synthetic_image_embed(frame, mask))
        return masks, EmbeddingMatrix.from_records(records)

    def test_identity_config(self, corpus):
        masks, matrix = corpus
        config = FilterConfig(
            k=len(masks), per_cluster_quota=len(masks), dedup_tau=None, text_prompts=()
        )
        result = run_filter_pipeline(masks, matrix, config)
        assert result.kept_ids == sorted(m.id for m in masks)

    def test_drop_prompts_remove_categories(self, corpus):
        masks, matrix = corpus
        labels = {m.id: m.label for m in masks}
        prompts = []
        for token in ("path", "tree"):
            proto = synthetic_text_embed(token)
            own = [float(np.dot(matrix.row(i), proto.vector))
                   for i in matrix.ids if labels[i] == token]
            rest = [float(np.dot(matrix.row(i), proto.vector))
                    for i in matrix.ids if labels[i] not in ("sky", "path", "tree")]
            prompts.append(TextPrompt(token, "drop", (min(own) + max(rest)) / 2))
        config = FilterConfig(
            k=10, per_cluster_quota=500, dedup_tau=None, text_prompts=tuple(prompts)
        )
        result = run_filter_pipeline(masks, matrix, config)
        survivors = {labels[i] for i in result.kept_ids}
        assert "path" not in survivors and "tree" not in survivors

    def test_deterministic(self, corpus):
        masks, matrix = corpus
        config = FilterConfig(k=8, per_cluster_quota=3, dedup_tau=0.995, stage_seed=5)
        a = run_filter_pipeline(masks, matrix, config)
        b = run_filter_pipeline(masks, matrix, config)
        assert a.kept_ids == b.kept_ids

    def test_order_invariant(self, corpus):
        masks, matrix = corpus
        config = FilterConfig(k=8, per_cluster_quota=3, dedup_tau=0.995, stage_seed=5)
        rng = np.random.default_rng(0)
        shuffled = list(masks)
        rng.shuffle(shuffled)
        ids = [m.id for m in shuffled]
        assert (
            run_filter_pipeline(shuffled, matrix.subset(ids), config).kept_ids
            == run_filter_pipeline(masks, matrix, config).kept_ids
        )

    def test_rebalancing_reduces_dominant_share(self, corpus):
        masks, matrix = corpus
        labels = {m.id: m.label for m in masks}
        before = histogram(labels.values())
        top_share_before = before[0][1] / len(masks)
        assert top_share_before >= 0.3  # corpus is dominated by one category
        config = FilterConfig(k=20, per_cluster_quota=2, dedup_tau=None, stage_seed=3)
        result = run_filter_pipeline(masks, matrix, config)
        after = histogram(labels[i] for i in result.kept_ids)
        top_share_after = after[0][1] / len(result.kept_ids)
        assert top_share_after < top_share_before
