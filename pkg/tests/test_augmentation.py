import numpy as np
import pytest

from maskforge import fixtures
from maskforge.augmentation import (
    PROFILES,
    AugProfile,
    Placement,
    TransformParams,
    composite_over,
    composite_under,
    generate_pairs,
    place_mask,
    placement_stats,
    transform_mask,
)
from maskforge.core.types import Frame, MaskRecord, TargetExemplar
from maskforge.errors import ParameterError
from tests.reference import naive_composite_over, naive_composite_under


def sprite_scene(seed=0, size=96):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    frame = Frame(id="src", width=size, height=size, pixels=pixels)
    bitmap = np.zeros((size, size), dtype=bool)
    bitmap[10:26, 14:34] = True
    bitmap[12:18, 30:42] = True
    mask = MaskRecord.from_bitmap("src/m00", "src", bitmap)
    return frame, mask


def make_target(seed=1, size=96):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    frame = Frame(id=f"tgt{seed}", width=size, height=size, pixels=pixels)
    prior = np.zeros((size, size), dtype=bool)
    prior[size - 30 :, size - 40 :] = True
    mask = MaskRecord.from_bitmap(f"tgt{seed}/prior", f"tgt{seed}", prior)
    return TargetExemplar(frame=frame, prior_mask=mask)


class TestTransformMask:
    def test_identity_is_pixel_exact(self):
        frame, mask = sprite_scene()
        patch, bitmap = transform_mask(frame, mask, TransformParams(0.0, False, (0, 0)))
        x, y, w, h = mask.bbox
        crop = frame.pixels[y : y + h, x : x + w].copy()
        crop[~mask.decode()[y : y + h, x : x + w]] = 0
        np.testing.assert_array_equal(patch, crop)
        np.testing.assert_array_equal(bitmap, mask.decode()[y : y + h, x : x + w])

    def test_rotation_360_roundtrip_area(self):
        frame, mask = sprite_scene()
        _, identity = transform_mask(frame, mask, TransformParams(0.0, False, (0, 0)))
        _, rotated = transform_mask(frame, mask, TransformParams(360.0, False, (0, 0)))
        assert abs(int(rotated.sum()) - int(identity.sum())) <= 0.02 * identity.sum()

    def test_hflip_involution(self):
        frame, mask = sprite_scene()
        once, bm_once = transform_mask(frame, mask, TransformParams(0.0, True, (0, 0)))
        np.testing.assert_array_equal(bm_once[:, ::-1],
                                      transform_mask(frame, mask,
                                                     TransformParams(0.0, False, (0, 0)))[1])

    def test_rotation_area_reasonable(self):
        frame, mask = sprite_scene()
        _, identity = transform_mask(frame, mask, TransformParams(0.0, False, (0, 0)))
        for angle in (45.0, 90.0, 133.7, -71.0):
            _, rotated = transform_mask(frame, mask, TransformParams(angle, False, (0, 0)))
            assert rotated.any()
            assert abs(int(rotated.sum()) - int(identity.sum())) <= 0.12 * identity.sum()


class TestPlacement:
    def test_prior_as_bitmap_zero_offset_full_overlap(self):
        target = make_target()
        prior = target.prior_mask.decode()
        overlap, visible = placement_stats(prior, prior, 0, 0)
        assert overlap == 1.0
        assert visible == 0.0

    def test_single_pixel_lands_inside_prior(self):
        target = make_target()
        bitmap = np.zeros((1, 1), dtype=bool)
        bitmap[0, 0] = True
        rng = np.random.default_rng(3)
        placement = place_mask(target, bitmap, rng)
        prior = target.prior_mask.decode()
        assert prior[placement.dy, placement.dx]
        assert placement.overlap == 1.0

    def test_deterministic_given_rng_state(self):
        target = make_target()
        frame, mask = sprite_scene()
        _, bitmap = transform_mask(frame, mask, TransformParams(0.0, False, (0, 0)))
        a = place_mask(target, bitmap, np.random.default_rng(5))
        b = place_mask(target, bitmap, np.random.default_rng(5))
        assert a == b

    def test_oversize_bitmap_rejected(self):
        target = make_target()
        with pytest.raises(ParameterError):
            place_mask(target, np.ones((200, 200), dtype=bool), np.random.default_rng(0))

    def test_accepted_placement_meets_thresholds(self):
        target = make_target()
        frame, mask = sprite_scene()
        _, bitmap = transform_mask(frame, mask, TransformParams(0.0, False, (0, 0)))
        placement = place_mask(target, bitmap, np.random.default_rng(11))
        assert placement.overlap >= 0.1


class TestCompositors:
    def test_full_frame_bitmap_replaces_everything(self):
        target = make_target()
        size = target.frame.width
        bitmap = np.ones((size, size), dtype=bool)
        patch = np.full((size, size, 3), 7, dtype=np.uint8)
        out = composite_over(target, patch, bitmap, (0, 0))
        np.testing.assert_array_equal(out, patch)

    def test_identity_paste(self):
        target = make_target()
        x, y, w, h = target.prior_mask.bbox
        bitmap = target.prior_mask.decode()[y : y + h, x : x + w]
        patch = target.frame.pixels[y : y + h, x : x + w]
        out = composite_over(target, patch, bitmap, (x, y))
        np.testing.assert_array_equal(out, target.frame.pixels)

    def test_under_fully_occluded_returns_target(self):
        target = make_target()
        x, y, _, _ = target.prior_mask.bbox
        bitmap = np.ones((5, 5), dtype=bool)
        patch = np.full((5, 5, 3), 250, dtype=np.uint8)
        out = composite_under(target, patch, bitmap, (x + 2, y + 2))
        np.testing.assert_array_equal(out, target.frame.pixels)

    def test_under_disjoint_equals_over(self):
        target = make_target()
        bitmap = np.ones((6, 6), dtype=bool)
        patch = np.full((6, 6, 3), 9, dtype=np.uint8)
        over = composite_over(target, patch, bitmap, (2, 2))
        under = composite_under(target, patch, bitmap, (2, 2))
        np.testing.assert_array_equal(over, under)

    def test_per_pixel_oracle(self):
        rng = np.random.default_rng(17)
        for trial in range(25):
            size = 40
            target = make_target(seed=trial, size=size)
            bh, bw = int(rng.integers(3, 20)), int(rng.integers(3, 20))
            bitmap = rng.random((bh, bw)) < 0.6
            if not bitmap.any():
                bitmap[0, 0] = True
            patch = rng.integers(0, 256, size=(bh, bw, 3), dtype=np.uint8)
            dx, dy = int(rng.integers(-5, size)), int(rng.integers(-5, size))
            over = composite_over(target, patch, bitmap, (dx, dy))
            under = composite_under(target, patch, bitmap, (dx, dy))
            prior = target.prior_mask.decode()
            np.testing.assert_array_equal(
                over, naive_composite_over(target.frame.pixels, patch, bitmap, (dx, dy))
            )
            np.testing.assert_array_equal(
                under,
                naive_composite_under(target.frame.pixels, prior, patch, bitmap, (dx, dy)),
            )
            # siblings differ only where translated bitmap overlaps the prior
            diff = (over != under).any(axis=2)
            allowed = np.zeros_like(diff)
            sx0, sy0 = max(0, -dx), max(0, -dy)
            sx1, sy1 = min(bw, size - dx), min(bh, size - dy)
            if sx1 > sx0 and sy1 > sy0:
                sub = bitmap[sy0:sy1, sx0:sx1]
                allowed[dy + sy0 : dy + sy1, dx + sx0 : dx + sx1] = sub
            allowed &= prior
            assert not (diff & ~allowed).any()


class TestGeneratePairs:
    def _inputs(self, n_masks=3, n_targets=2):
        cfg = fixtures.SceneConfig(seed=19, object_count_range=(1, 2))
        scenes, _ = fixtures.gen_corpus(cfg, 12)
        frames = {f.id: f for f, _ in scenes}
        masks = [
            m for _, t in scenes for m in t.masks
            if m.label not in ("sky", "path", "tree")
        ][:n_masks]
        targets = [fixtures.target_exemplar(f, cfg) for f, t in scenes[:n_targets]]
        return masks, frames, targets

    def test_single_pair_cardinality_and_shared_transform(self):
        masks, frames, targets = self._inputs(1, 1)
        samples = generate_pairs(masks, frames, targets, PROFILES["limited"], seed=3)
        assert len(samples) == 2
        neg, pos = samples
        assert {neg.class_name, pos.class_name} == {"negative", "positive"}
        assert neg.provenance["transform"] == pos.provenance["transform"]

    def test_cardinality_and_balance(self):
        masks, frames, targets = self._inputs(4, 3)
        samples = generate_pairs(masks, frames, targets, PROFILES["limited"], seed=3)
        assert len(samples) == 4 * 3 * 2
        positives = sum(1 for s in samples if s.class_name == "positive")
        assert positives == len(samples) // 2

    def test_deterministic_across_workers(self):
        masks, frames, targets = self._inputs(4, 2)
        one = generate_pairs(masks, frames, targets, PROFILES["heavy"], seed=9, workers=1)
        four = generate_pairs(masks, frames, targets, PROFILES["heavy"], seed=9, workers=4)
        assert [s.sample_id for s in one] == [s.sample_id for s in four]
        for a, b in zip(one, four):
            assert a.provenance == b.provenance
            np.testing.assert_array_equal(a.image, b.image)

    def test_render_false_skips_images(self):
        masks, frames, targets = self._inputs(2, 2)
        samples = generate_pairs(masks, frames, targets, PROFILES["limited"], seed=3,
                                 render=False)
        assert all(s.image is None for s in samples)
        assert len(samples) == 8

    def test_empty_inputs_rejected(self):
        masks, frames, targets = self._inputs(2, 1)
        with pytest.raises(ParameterError):
            generate_pairs([], frames, targets, PROFILES["limited"], seed=1)
        with pytest.raises(ParameterError):
            generate_pairs(masks, frames, [], PROFILES["limited"], seed=1)

    def test_low_visibility_negative_flagged_not_dropped(self):
        # a single-pixel mask always lands inside the prior region, fully occluded
        size = 64
        rng = np.random.default_rng(2)
        pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        frame = Frame(id="one", width=size, height=size, pixels=pixels)
        bitmap = np.zeros((size, size), dtype=bool)
        bitmap[5, 5] = True
        mask = MaskRecord.from_bitmap("one/m0", "one", bitmap)
        target = make_target(seed=5, size=size)
        samples = generate_pairs([mask], {"one": frame}, [target],
                                 AugProfile("none", 0.0, 0.0), seed=1)
        assert len(samples) == 2  # pairing cardinality stays exact
        negative = next(s for s in samples if s.class_name == "negative")
        positive = next(s for s in samples if s.class_name == "positive")
        assert negative.provenance.get("low_visibility") is True
        assert "low_visibility" not in positive.provenance
        np.testing.assert_array_equal(negative.image, target.frame.pixels)

    def test_siblings_differ_only_inside_prior_overlap(self):
        masks, frames, targets = self._inputs(3, 2)
        samples = generate_pairs(masks, frames, targets, PROFILES["limited"], seed=21)
        by_base = {}
        for s in samples:
            base = s.sample_id.rsplit("__", 1)[0]
            by_base.setdefault(base, {})[s.class_name] = s
        prior = targets[0].prior_mask.decode()
        for base, pair in by_base.items():
            pos, neg = pair["positive"], pair["negative"]
            diff = (pos.image != neg.image).any(axis=2)
            assert not (diff & ~prior).any()
