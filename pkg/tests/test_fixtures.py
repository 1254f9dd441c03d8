import numpy as np
import pytest

from maskforge import fixtures
from maskforge.embedding import cosine_similarity, synthetic_image_embed, synthetic_text_embed
from maskforge.errors import VocabularyError


class TestGenScene:
    def test_deterministic(self):
        cfg = fixtures.SceneConfig(seed=21)
        f1, t1 = fixtures.gen_scene(cfg, 3)
        f2, t2 = fixtures.gen_scene(cfg, 3)
        assert f1.id == f2.id
        np.testing.assert_array_equal(f1.pixels, f2.pixels)
        assert [m.id for m in t1.masks] == [m.id for m in t2.masks]

    def test_clip_probability_zero(self):
        cfg = fixtures.SceneConfig(seed=21, clip_probability=0.0)
        for i in range(20):
            _, truth = fixtures.gen_scene(cfg, i)
            assert not truth.is_clipping
            assert truth.clipping_object_id is None

    def test_clip_probability_one_forces_overlap(self):
        cfg = fixtures.SceneConfig(seed=21, clip_probability=1.0)
        for i in range(20):
            _, truth = fixtures.gen_scene(cfg, i)
            assert truth.is_clipping
            clipper = next(m for m in truth.masks if m.id == truth.clipping_object_id)
            overlap = clipper.decode() & truth.weapon_mask.decode()
            assert overlap.any()

    def test_non_clipping_masks_never_touch_weapon(self):
        cfg = fixtures.SceneConfig(seed=21, clip_probability=0.5)
        for i in range(20):
            _, truth = fixtures.gen_scene(cfg, i)
            weapon = truth.weapon_mask.decode()
            for mask in truth.masks:
                if mask.id != truth.clipping_object_id:
                    assert not (mask.decode() & weapon).any()

    def test_masks_are_exact_and_disjoint(self):
        cfg = fixtures.SceneConfig(seed=4)
        _, truth = fixtures.gen_scene(cfg, 0)
        union = np.zeros((cfg.height, cfg.width), dtype=int)
        for mask in truth.masks:
            mask.validate()
            union += mask.decode().astype(int)
        assert union.max() <= 1  # visible regions partition

    def test_weapon_mask_identical_across_scenes(self):
        cfg = fixtures.SceneConfig(seed=5)
        _, t0 = fixtures.gen_scene(cfg, 0)
        _, t1 = fixtures.gen_scene(cfg, 17)
        assert t0.weapon_mask.rle == t1.weapon_mask.rle


class TestGenCorpus:
    def test_background_dominates_with_skewed_weights(self):
        cfg = fixtures.SceneConfig(seed=30)
        _, histogram = fixtures.gen_corpus(cfg, 300)
        counts = dict(histogram)
        total = sum(counts.values())
        background = counts.get("path", 0) + counts.get("tree", 0) + counts.get("sky", 0)
        assert background >= 0.5 * total

    def test_histogram_sorted_desc(self):
        cfg = fixtures.SceneConfig(seed=30)
        _, histogram = fixtures.gen_corpus(cfg, 20)
        counts = [c for _, c in histogram]
        assert counts == sorted(counts, reverse=True)

    def test_single_scene(self):
        cfg = fixtures.SceneConfig(seed=30)
        scenes, _ = fixtures.gen_corpus(cfg, 1)
        assert len(scenes) == 1

    def test_empirical_clip_rate_binomial(self):
        p = 0.007
        n = 2000
        cfg = fixtures.SceneConfig(seed=8, clip_probability=p)
        scenes, _ = fixtures.gen_corpus(cfg, n)
        clips = sum(1 for _, t in scenes if t.is_clipping)
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(clips - n * p) <= 3 * sigma

    def test_ood_restriction_excludes_id_sprites(self):
        cfg = fixtures.SceneConfig(seed=9)
        ood_cfg = cfg.restricted(cfg.ood_categories)
        scenes, _ = fixtures.gen_corpus(ood_cfg, 40)
        for _, truth in scenes:
            for mask in truth.masks:
                assert mask.label not in cfg.id_categories
        id_cfg = cfg.restricted(cfg.id_categories)
        scenes, _ = fixtures.gen_corpus(id_cfg, 40)
        for _, truth in scenes:
            for mask in truth.masks:
                assert mask.label not in cfg.ood_categories


class TestCanonicalExemplars:
    def test_every_token_has_eight(self):
        for token in fixtures.vocabulary():
            assert len(fixtures.canonical_exemplars(token)) == 8

    def test_deterministic(self):
        a = fixtures.canonical_exemplars("tree")
        fixtures.canonical_exemplars.cache_clear()
        b = fixtures.canonical_exemplars("tree")
        for (fa, ma), (fb, mb) in zip(a, b):
            np.testing.assert_array_equal(fa.pixels, fb.pixels)
            assert ma.rle == mb.rle

    def test_unknown_category(self):
        with pytest.raises(VocabularyError):
            fixtures.canonical_exemplars("spaceship")

    def test_prototypes_have_positive_margin(self):
        # own-category masks score above every sprite mask for each background
        cfg = fixtures.SceneConfig(seed=11, object_count_range=(1, 2))
        scenes, _ = fixtures.gen_corpus(cfg, 30)
        embedded = [
            (m.label, synthetic_image_embed(f, m).vector)
            for f, t in scenes
            for m in t.masks
        ]
        for token in ("sky", "path", "tree"):
            proto = synthetic_text_embed(token).vector
            own = [cosine_similarity(v, proto) for lab, v in embedded if lab == token]
            sprites = [
                cosine_similarity(v, proto)
                for lab, v in embedded
                if lab not in ("sky", "path", "tree")
            ]
            assert min(own) > max(sprites)


class TestTruthRoundtrip:
    def test_roundtrip(self, tmp_path):
        cfg = fixtures.SceneConfig(seed=2)
        scenes, _ = fixtures.gen_corpus(cfg, 5)
        path = tmp_path / "truth.jsonl"
        fixtures.write_truth_jsonl(scenes, path)
        loaded = fixtures.read_truth_jsonl(path)
        assert set(loaded) == {f.id for f, _ in scenes}
        for frame, truth in scenes:
            got = loaded[frame.id]
            assert got.is_clipping == truth.is_clipping
            assert [m.id for m in got.masks] == [m.id for m in truth.masks]
            assert got.weapon_mask.rle == truth.weapon_mask.rle
