"""Splitting, stratified cross-validation folds and the headline metrics."""

from __future__ import annotations

import numpy as np
import pytest

from helpers import as_row_multiset, embed, random_counts
from policycite.errors import FoldError, SplitError
from policycite.evaluation import (
    ConfusionMatrix,
    EvalReport,
    Metrics,
    confusion,
    kfold,
    mean_metrics,
    metrics,
    split_indices,
    split_train_test,
)
from policycite.features import N_FEATURES, RecordSet


def _labeled_set(n_neg: int, n_pos: int, seed: int = 0) -> RecordSet:
    """Rows with unique twitter counts so positions are traceable."""
    n = n_neg + n_pos
    values = np.zeros((n, N_FEATURES), dtype=np.int64)
    values[:, 4] = np.arange(n)
    labels = np.repeat([False, True], [n_neg, n_pos])
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return RecordSet(values[order], labels[order])


class TestConfusion:
    def test_perfect_agreement(self):
        cm = confusion([True, True, False], [True, True, False])
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (2, 1, 0, 0)

    def test_total_miss(self):
        cm = confusion([False] * 4, [True] * 4)
        assert (cm.fn, cm.tp, cm.fp, cm.tn) == (4, 0, 0, 0)

    def test_all_four_cells(self):
        cm = confusion([True, True, False, False], [True, False, True, False])
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 1, 1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            confusion([True], [True, False])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            confusion([], [])

    def test_total_equals_row_count(self):
        rng = np.random.default_rng(42)
        pred = rng.random(257) < 0.4
        true = rng.random(257) < 0.6
        assert confusion(pred, true).total == 257


class TestMetrics:
    def test_hand_derived_values(self):
        """tp=40, fp=10, fn=5, tn=45: every metric from its definition."""
        m = metrics(ConfusionMatrix(tp=40, fp=10, fn=5, tn=45))
        assert m.accuracy == pytest.approx(0.85, abs=1e-4)
        assert m.precision == pytest.approx(0.80, abs=1e-4)
        assert m.recall == pytest.approx(0.8889, abs=1e-4)
        assert m.f1 == pytest.approx(0.8421, abs=1e-4)
        assert not m.degenerate

    def test_perfect_predictions(self):
        m = metrics(ConfusionMatrix(tp=7, fp=0, fn=0, tn=3))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_zero_division_sets_degenerate_flag(self):
        m = metrics(ConfusionMatrix(tp=0, fp=0, fn=5, tn=5))
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
        assert m.accuracy == 0.5
        assert m.degenerate

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            metrics(ConfusionMatrix(0, 0, 0, 0))

    def test_micro_recall_equals_accuracy(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            tp, fp, fn, tn = (int(v) for v in rng.integers(0, 30, 4))
            if tp + fp + fn + tn == 0:
                continue
            m = metrics(ConfusionMatrix(tp, fp, fn, tn))
            assert m.recall_micro == m.accuracy

    def test_f1_is_harmonic_mean_when_defined(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            tp, fp, fn, tn = (int(v) for v in rng.integers(0, 40, 4))
            if tp + fp + fn + tn == 0:
                continue
            m = metrics(ConfusionMatrix(tp, fp, fn, tn))
            assert 0.0 <= m.f1 <= min(2 * m.precision, 2 * m.recall) + 1e-12
            if m.precision > 0 and m.recall > 0:
                expected = 2 * m.precision * m.recall / (m.precision + m.recall)
                assert m.f1 == pytest.approx(expected, abs=1e-12)

    def test_self_confusion_is_all_ones(self):
        rng = np.random.default_rng(1)
        x = rng.random(31) < 0.5
        x[0], x[1] = True, False
        m = metrics(confusion(x, x))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_mean_metrics_averages_each_field(self):
        parts = [
            Metrics(0.5, 0.4, 0.6, 0.48, False),
            Metrics(1.0, 1.0, 1.0, 1.0, True),
        ]
        m = mean_metrics(parts)
        assert m.accuracy == pytest.approx(0.75)
        assert m.precision == pytest.approx(0.7)
        assert m.degenerate  # any degenerate fold marks the mean


class TestSplit:
    def test_balanced_100_rows_fraction_02(self):
        rows = _labeled_set(50, 50)
        train, test = split_train_test(rows, 0.2, seed=4)
        assert len(train) == 80 and len(test) == 20
        assert test.class_counts() == (10, 10)

    def test_five_rows_fraction_02(self):
        rows = _labeled_set(2, 3)
        train, test = split_train_test(rows, 0.2, seed=4)
        assert len(train) == 4 and len(test) == 1

    def test_deterministic(self):
        rows = _labeled_set(40, 25)
        a = split_indices(rows.labels, 0.3, seed=99)
        b = split_indices(rows.labels, 0.3, seed=99)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_disjoint_and_exhaustive(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n_neg = int(rng.integers(3, 40))
            n_pos = int(rng.integers(3, 40))
            rows = _labeled_set(n_neg, n_pos, seed=int(rng.integers(1000)))
            fraction = float(rng.uniform(0.15, 0.5))
            train, test = split_train_test(rows, fraction, seed=int(rng.integers(1000)))
            assert len(test) == int(np.floor(len(rows) * fraction))
            combined = as_row_multiset(train) + as_row_multiset(test)
            assert sorted(combined) == as_row_multiset(rows)

    def test_stratification_within_one_row(self):
        """Per-class test share stays within one row of the exact quota."""
        rng = np.random.default_rng(15)
        for _ in range(20):
            n_neg = int(rng.integers(5, 60))
            n_pos = int(rng.integers(5, 60))
            rows = _labeled_set(n_neg, n_pos, seed=int(rng.integers(1000)))
            fraction = float(rng.uniform(0.2, 0.4))
            _, test = split_train_test(rows, fraction, seed=int(rng.integers(1000)))
            test_neg, test_pos = test.class_counts()
            assert abs(test_neg - n_neg * fraction) < 1.0
            assert abs(test_pos - n_pos * fraction) < 1.0

    def test_fraction_out_of_range_rejected(self):
        rows = _labeled_set(5, 5)
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(SplitError):
                split_train_test(rows, bad, seed=0)

    def test_too_few_rows_rejected(self):
        rows = _labeled_set(2, 2)
        with pytest.raises(SplitError):
            split_train_test(rows, 0.25, seed=0)

    def test_train_losing_a_class_rejected(self):
        # 9 negative, 1 positive at fraction 0.9: the lone positive would
        # land in the test set, leaving a single-class training set.
        rows = _labeled_set(9, 1)
        with pytest.raises(SplitError):
            split_train_test(rows, 0.9, seed=0)


class TestKfold:
    def test_103_rows_10_folds(self):
        rows = _labeled_set(53, 50)
        folds = kfold(rows, 10, seed=2)
        sizes = sorted(len(val) for _, val in folds)
        assert sizes == [10] * 7 + [11] * 3

    def test_n_equals_k_single_class(self):
        rows = embed({0: list(range(10))}, [False] * 10)
        folds = kfold(rows, 10, seed=0)
        assert len(folds) == 10
        assert all(len(val) == 1 for _, val in folds)

    def test_zero_folds_rejected(self):
        rows = _labeled_set(5, 5)
        with pytest.raises(FoldError):
            kfold(rows, 0, seed=0)

    def test_k_larger_than_n_rejected(self):
        rows = _labeled_set(3, 3)
        with pytest.raises(FoldError):
            kfold(rows, 7, seed=0)

    def test_class_smaller_than_k_rejected(self):
        rows = _labeled_set(20, 3)
        with pytest.raises(FoldError):
            kfold(rows, 5, seed=0)

    def test_validation_folds_partition_the_input(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            rows = random_counts(rng, int(rng.integers(30, 90)))
            neg, pos = rows.class_counts()
            k = int(rng.integers(2, min(neg, pos) + 1))
            folds = kfold(rows, k, seed=int(rng.integers(1000)))
            pooled = []
            for _, val in folds:
                pooled.extend(as_row_multiset(val))
            assert sorted(pooled) == as_row_multiset(rows)

    def test_fold_sizes_and_class_counts_differ_by_at_most_one(self):
        rng = np.random.default_rng(33)
        for _ in range(10):
            n_neg = int(rng.integers(8, 40))
            n_pos = int(rng.integers(8, 40))
            rows = _labeled_set(n_neg, n_pos, seed=int(rng.integers(1000)))
            k = int(rng.integers(2, 9))
            folds = kfold(rows, k, seed=int(rng.integers(1000)))
            sizes = [len(val) for _, val in folds]
            assert max(sizes) - min(sizes) <= 1
            for cls in (0, 1):
                per_fold = [val.class_counts()[cls] for _, val in folds]
                assert max(per_fold) - min(per_fold) <= 1

    def test_train_is_the_complement_of_validation(self):
        rows = _labeled_set(12, 12)
        for train, val in kfold(rows, 4, seed=6):
            assert len(train) + len(val) == len(rows)
            assert sorted(as_row_multiset(train) + as_row_multiset(val)) == as_row_multiset(rows)

    def test_deterministic(self):
        rows = _labeled_set(15, 15)
        a = kfold(rows, 5, seed=13)
        b = kfold(rows, 5, seed=13)
        for (ta, va), (tb, vb) in zip(a, b):
            assert np.array_equal(va.values, vb.values)
            assert np.array_equal(ta.values, tb.values)


class TestEvalReport:
    def _report(self):
        return EvalReport(
            mode="holdout",
            folds=None,
            per_model={
                "mnb": Metrics(0.8, 0.75, 0.85, 0.7973, False),
                "rf": Metrics(0.9, 0.9, 0.9, 0.9, False),
            },
        )

    def test_json_shape(self):
        data = self._report().to_json_dict()
        assert data["mode"] == "holdout"
        assert set(data["models"]) == {"mnb", "rf"}
        assert data["models"]["rf"]["recall_micro"] == 0.9

    def test_markdown_rows(self):
        text = self._report().to_markdown()
        for label in ("Accuracy", "Precision", "Recall", "F1-Measure", "Recall (micro avg)"):
            assert label in text
        assert "Multinomial Naive Bayes" in text
        assert "Random Forest" in text

    def test_markdown_flags_degenerate_models(self):
        report = EvalReport(
            mode="cv_mean",
            folds=5,
            per_model={"svm": Metrics(0.5, 0.0, 0.0, 0.0, True)},
        )
        assert "Degenerate" in report.to_markdown()
