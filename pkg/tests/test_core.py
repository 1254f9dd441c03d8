import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskforge.core import (
    DatasetManifest,
    MaskRecord,
    SampleEntry,
    canonical_json,
    config_hash,
    derive_seed,
    mask_stats,
    read_masks_jsonl,
    rle_decode,
    rle_encode,
    write_masks_jsonl,
)
from maskforge.errors import FormatError, ParameterError, ValidationError
from tests.reference import naive_mask_stats, naive_rle_decode


class TestRle:
    def test_all_zero(self):
        assert rle_encode(np.zeros((4, 4), dtype=bool)) == [16]

    def test_all_one(self):
        assert rle_encode(np.ones((4, 4), dtype=bool)) == [0, 16]

    def test_decode_all_zero(self):
        assert not rle_decode([16], 4, 4).any()

    def test_decode_all_one(self):
        assert rle_decode([0, 16], 4, 4).all()

    def test_decode_hand_example(self):
        # [3, 2, 11]: pixels 3 and 4 set in row-major scan order
        bitmap = rle_decode([3, 2, 11], 4, 4)
        flat = bitmap.ravel()
        assert list(np.flatnonzero(flat)) == [3, 4]
        np.testing.assert_array_equal(bitmap, naive_rle_decode([3, 2, 11], 4, 4))

    def test_empty_bitmap_rejected(self):
        with pytest.raises(ParameterError):
            rle_encode(np.zeros((0, 4), dtype=bool))

    def test_count_sum_mismatch_rejected(self):
        with pytest.raises(FormatError):
            rle_decode([5, 5], 4, 4)

    def test_roundtrip_random(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            h, w = rng.integers(1, 33, size=2)
            bitmap = rng.random((h, w)) < rng.random()
            counts = rle_encode(bitmap)
            assert sum(counts) == w * h
            np.testing.assert_array_equal(rle_decode(counts, int(w), int(h)), bitmap)

    @given(st.integers(1, 24), st.integers(1, 24), st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_property(self, h, w, seed):
        bitmap = np.random.default_rng(seed).random((h, w)) < 0.5
        np.testing.assert_array_equal(rle_decode(rle_encode(bitmap), w, h), bitmap)


class TestMaskStats:
    def test_single_pixel(self):
        bitmap = np.zeros((6, 6), dtype=bool)
        bitmap[3, 2] = True
        assert mask_stats(bitmap) == (1, (2, 3, 1, 1))

    def test_full(self):
        assert mask_stats(np.ones((4, 4), dtype=bool)) == (16, (0, 0, 4, 4))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            mask_stats(np.zeros((4, 4), dtype=bool))

    def test_against_double_loop(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            bitmap = rng.random((rng.integers(2, 20), rng.integers(2, 20))) < 0.3
            if not bitmap.any():
                bitmap[0, 0] = True
            assert mask_stats(bitmap) == naive_mask_stats(bitmap)


class TestMaskRecord:
    def _bitmap(self):
        bitmap = np.zeros((8, 10), dtype=bool)
        bitmap[2:5, 3:7] = True
        return bitmap

    def test_from_bitmap_roundtrip(self):
        record = MaskRecord.from_bitmap("m0", "f0", self._bitmap(), label="box")
        np.testing.assert_array_equal(record.decode(), self._bitmap())
        record.validate()

    def test_jsonl_roundtrip(self, tmp_path):
        records = [
            MaskRecord.from_bitmap(f"m{i}", "f0", np.roll(self._bitmap(), i, axis=1))
            for i in range(3)
        ]
        path = tmp_path / "masks.jsonl"
        write_masks_jsonl(records, path)
        loaded = read_masks_jsonl(path)
        assert loaded == records

    def test_inconsistent_area_rejected_with_line_and_id(self, tmp_path):
        record = MaskRecord.from_bitmap("m-bad", "f0", self._bitmap())
        doc = record.to_json()
        doc["area"] = doc["area"] + 1
        path = tmp_path / "masks.jsonl"
        path.write_text(json.dumps(doc) + "\n")
        with pytest.raises(ValidationError) as err:
            read_masks_jsonl(path)
        assert "m-bad" in str(err.value)
        assert "line 1" in str(err.value)

    def test_malformed_line_reports_index(self, tmp_path):
        path = tmp_path / "masks.jsonl"
        path.write_text('{"id": "m0"\n')
        with pytest.raises(FormatError) as err:
            read_masks_jsonl(path)
        assert "line 1" in str(err.value)


class TestManifest:
    def _manifest(self):
        samples = [
            SampleEntry(f"s{i:03d}", f"images/s{i:03d}.png", "positive" if i % 2 else "negative",
                        {"source_mask_id": f"m{i}", "seed": i})
            for i in range(10)
        ]
        return DatasetManifest(
            samples=samples,
            splits={"train": [s.sample_id for s in samples[:6]],
                    "val": [s.sample_id for s in samples[6:]]},
            prevalence=0.5,
            config_hash="abc123",
        )

    def test_roundtrip_preserves_order_and_provenance(self, tmp_path):
        manifest = self._manifest()
        path = tmp_path / "manifest.json"
        manifest.save(path)
        loaded = DatasetManifest.load(path)
        assert loaded.samples == manifest.samples
        assert loaded.splits == manifest.splits
        assert loaded.prevalence == manifest.prevalence
        loaded.validate()

    def test_duplicate_ids_rejected(self):
        manifest = self._manifest()
        manifest.samples.append(manifest.samples[0])
        with pytest.raises(ValidationError):
            manifest.validate()

    def test_sample_in_two_splits_rejected(self):
        manifest = self._manifest()
        manifest.splits["val"].append(manifest.splits["train"][0])
        with pytest.raises(ValidationError):
            manifest.validate()

    def test_prevalence_must_be_exact(self):
        manifest = self._manifest()
        manifest.prevalence = 0.4999
        with pytest.raises(ValidationError):
            manifest.validate()


class TestSeedingAndHash:
    def test_derive_seed_deterministic(self):
        assert derive_seed(42, "stage") == derive_seed(42, "stage")
        assert derive_seed(42, "stage") != derive_seed(43, "stage")
        assert derive_seed(42, "a") != derive_seed(42, "b")

    def test_label_boundaries_matter(self):
        assert derive_seed(1, "ab", "c") != derive_seed(1, "a", "bc")

    def test_config_hash_sensitivity(self):
        base = {"seed": 1, "filter": {"k": 50, "linkage": "average"}}
        changed = {"seed": 1, "filter": {"k": 51, "linkage": "average"}}
        assert config_hash(base) == config_hash(dict(base))
        assert config_hash(base) != config_hash(changed)

    def test_canonical_json_key_order(self):
        assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
