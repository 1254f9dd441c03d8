import json

import numpy as np
import pytest

from maskforge.errors import ParameterError
from maskforge.evaluation import (
    ConfusionMatrix,
    EvalReport,
    balanced_accuracy,
    confusion,
    evaluate,
    f1,
    precision,
    recall,
    threshold_sweep,
)
from tests.reference import naive_confusion


class TestConfusion:
    def test_all_correct(self):
        cm = confusion([0.9, 0.1, 0.8], [1, 0, 1], 0.5)
        assert (cm.fp, cm.fn) == (0, 0)

    def test_threshold_zero_predicts_all_positive(self):
        cm = confusion([0.2, 0.6, 0.0], [0, 1, 1], 0.0)
        assert cm.tn == 0 and cm.fn == 0
        assert cm.tp + cm.fp == 3

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            n = int(rng.integers(1, 200))
            scores = rng.random(n)
            labels = (rng.random(n) < 0.3).astype(int)
            threshold = float(rng.random())
            cm = confusion(scores, labels, threshold)
            assert (cm.tp, cm.fp, cm.fn, cm.tn) == naive_confusion(scores, labels, threshold)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            confusion([0.5], [1, 0], 0.5)


class TestMetrics:
    def test_perfect(self):
        cm = ConfusionMatrix(tp=5, fp=0, fn=0, tn=5)
        assert precision(cm) == recall(cm) == f1(cm) == balanced_accuracy(cm) == 1.0

    def test_all_negative_predictions(self):
        cm = ConfusionMatrix(tp=0, fp=0, fn=4, tn=6)
        assert f1(cm) == 0.0
        assert precision(cm) == 0.0

    def test_hand_example(self):
        cm = ConfusionMatrix(tp=2, fp=1, fn=2, tn=0)
        assert precision(cm) == pytest.approx(2 / 3)
        assert recall(cm) == pytest.approx(1 / 2)
        assert f1(cm) == pytest.approx(4 / 7)

    def test_f1_is_harmonic_mean(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            cm = ConfusionMatrix(*(int(x) for x in rng.integers(1, 50, size=4)))
            p, r = precision(cm), recall(cm)
            assert f1(cm) == pytest.approx(2 / (1 / p + 1 / r))

    def test_all_positive_on_imbalanced_is_half(self):
        cm = ConfusionMatrix(tp=3, fp=97, fn=0, tn=0)
        assert balanced_accuracy(cm) == 0.5

    def test_random_coin_near_half(self):
        rng = np.random.default_rng(14)
        n = 20000
        labels = np.concatenate([np.ones(n // 2, dtype=int), np.zeros(n // 2, dtype=int)])
        scores = rng.random(n)
        cm = confusion(scores, labels, 0.5)
        assert abs(balanced_accuracy(cm) - 0.5) < 0.05

    def test_permutation_invariant(self):
        rng = np.random.default_rng(15)
        scores = rng.random(50)
        labels = (rng.random(50) < 0.4).astype(int)
        cm1 = confusion(scores, labels, 0.5)
        order = rng.permutation(50)
        cm2 = confusion(scores[order], labels[order], 0.5)
        assert cm1 == cm2


class TestSweep:
    def test_extreme_grid(self):
        scores = [0.2, 0.5, 0.9]
        labels = [0, 1, 1]
        reports = threshold_sweep(scores, labels, [0.0, 1.0 + 1e-9])
        low, high = reports[0][1], reports[1][1]
        assert low.counts.tn == 0 and low.counts.fn == 0
        assert high.counts.tp == 0 and high.counts.fp == 0

    def test_recall_nonincreasing(self):
        rng = np.random.default_rng(16)
        scores = rng.random(100)
        labels = (rng.random(100) < 0.5).astype(int)
        grid = sorted(rng.random(9).tolist())
        reports = threshold_sweep(scores, labels, grid)
        recalls = [recall(r.counts) for _, r in reports]
        assert all(b <= a for a, b in zip(recalls, recalls[1:]))

    def test_matches_per_threshold_oracle(self):
        rng = np.random.default_rng(17)
        scores = rng.random(70)
        labels = (rng.random(70) < 0.4).astype(int)
        grid = [0.1, 0.3, 0.5, 0.7, 0.9]
        for t, report in threshold_sweep(scores, labels, grid):
            assert (
                report.counts.tp, report.counts.fp, report.counts.fn, report.counts.tn
            ) == naive_confusion(scores, labels, t)

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ParameterError):
            threshold_sweep([0.5], [1], [0.9, 0.1])


class TestReport:
    def test_json_roundtrip_lossless(self, tmp_path):
        report = evaluate([0.9, 0.2, 0.7], [1, 0, 0], threshold=0.5, dataset_hash="d1")
        report.save(tmp_path / "report.json")
        loaded = EvalReport.from_json(json.loads((tmp_path / "report.json").read_text()))
        assert loaded.counts == report.counts
        assert loaded.threshold == report.threshold
        assert loaded.metrics == report.metrics
        assert loaded.dataset_hash == "d1"

    def test_metrics_in_unit_interval(self):
        rng = np.random.default_rng(18)
        report = evaluate(rng.random(40), (rng.random(40) < 0.2).astype(int))
        assert all(0.0 <= v <= 1.0 for v in report.metrics.values())
