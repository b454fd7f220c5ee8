"""Train/test splitting, stratified k-fold CV and binary classification metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FoldError, SplitError
from .features import RecordSet

MODEL_DISPLAY_NAMES = {
    "mnb": "Multinomial Naive Bayes",
    "rf": "Random Forest",
    "svm": "SVM",
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts; the positive class is "cited in policy"."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    """The four headline metrics plus a flag for zero-division fallbacks."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool = False

    @property
    def recall_micro(self) -> float:
        """Micro-averaged recall over pooled counts; equals accuracy for
        single-label binary classification."""
        return self.accuracy

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "recall_micro": self.recall_micro,
            "degenerate": self.degenerate,
        }


def confusion(predictions: Sequence[bool], truth: Sequence[bool]) -> ConfusionMatrix:
    """Count prediction/truth agreement against the positive class."""
    pred = np.asarray(predictions, dtype=bool)
    true = np.asarray(truth, dtype=bool)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError(f"prediction/truth shape mismatch: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ValueError("cannot build a confusion matrix from zero predictions")
    tp = int(np.count_nonzero(pred & true))
    fp = int(np.count_nonzero(pred & ~true))
    fn = int(np.count_nonzero(~pred & true))
    tn = int(np.count_nonzero(~pred & ~true))
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall and F1 for the positive class.

    Division-by-zero cases yield 0.0 and set the degenerate flag instead of
    raising, so a report can always be completed.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    degenerate = False
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision, degenerate = 0.0, True
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True
    return Metrics(accuracy, precision, recall, f1, degenerate)


def mean_metrics(parts: Sequence[Metrics]) -> Metrics:
    """Plain arithmetic mean of each metric over folds."""
    if not parts:
        raise ValueError("cannot average zero metric sets")
    n = len(parts)
    return Metrics(
        accuracy=sum(m.accuracy for m in parts) / n,
        precision=sum(m.precision for m in parts) / n,
        recall=sum(m.recall for m in parts) / n,
        f1=sum(m.f1 for m in parts) / n,
        degenerate=any(m.degenerate for m in parts),
    )


def _apportion_test_counts(class_sizes: Sequence[int], test_fraction: float) -> list[int]:
    """Per-class test-set sizes: class floors, then largest-remainder top-up
    so the total equals floor(n * test_fraction). Remainder ties favor the
    lower class index."""
    n = sum(class_sizes)
    n_test = math.floor(n * test_fraction)
    quotas = [size * test_fraction for size in class_sizes]
    counts = [math.floor(q) for q in quotas]
    extra = n_test - sum(counts)
    order = sorted(range(len(class_sizes)), key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in order[:extra]:
        counts[c] += 1
    return counts


def split_indices(
    labels: np.ndarray, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) row indices of a stratified split, each in input order."""
    labels = np.asarray(labels, dtype=bool)
    if not 0 < test_fraction < 1:
        raise SplitError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = labels.size
    if n < 5:
        raise SplitError(f"need at least 5 rows to split, got {n}")
    neg_idx = np.flatnonzero(~labels)
    pos_idx = np.flatnonzero(labels)
    test_counts = _apportion_test_counts([len(neg_idx), len(pos_idx)], test_fraction)
    rng = np.random.default_rng(seed)
    test_parts, train_parts = [], []
    for class_idx, take in zip((neg_idx, pos_idx), test_counts):
        shuffled = class_idx[rng.permutation(len(class_idx))]
        test_parts.append(shuffled[:take])
        train_parts.append(shuffled[take:])
    test_idx = np.sort(np.concatenate(test_parts))
    train_idx = np.sort(np.concatenate(train_parts))
    if test_idx.size == 0:
        raise SplitError("test split is empty; use more rows or a larger fraction")
    train_labels = labels[train_idx]
    if not (train_labels.any() and (~train_labels).any()):
        raise SplitError("train split would lose a class; too few rows per class")
    return train_idx, test_idx


def split_train_test(
    rows: RecordSet, test_fraction: float, seed: int
) -> tuple[RecordSet, RecordSet]:
    """Stratified disjoint split; test gets floor(n * test_fraction) rows."""
    train_idx, test_idx = split_indices(rows.labels, test_fraction, seed)
    prov = rows.provenance
    return (
        rows.subset(train_idx, provenance=f"{prov}|train"),
        rows.subset(test_idx, provenance=f"{prov}|test"),
    )


def kfold(rows: RecordSet, k: int, seed: int) -> list[tuple[RecordSet, RecordSet]]:
    """Stratified k-fold partition: (train, validation) pairs.

    Validation folds partition the rows; fold sizes differ by at most one,
    and so do per-class counts across folds.
    """
    n = len(rows)
    if k < 2 or k > n:
        raise FoldError(f"fold count must satisfy 2 <= k <= {n}, got {k}")
    neg, pos = rows.class_counts()
    present = [c for c in (neg, pos) if c > 0]
    if min(present) < k:
        raise FoldError(f"every present class needs at least k={k} rows, got ({neg}, {pos})")

    # Deal class-sorted row slots round-robin across folds; the resulting
    # per-fold class allocation balances both total and per-class sizes.
    y_sorted = np.repeat([0, 1], [neg, pos])
    allocation = np.stack(
        [np.bincount(y_sorted[f::k], minlength=2) for f in range(k)]
    )
    rng = np.random.default_rng(seed)
    fold_members: list[list[np.ndarray]] = [[] for _ in range(k)]
    for cls, class_idx in enumerate((np.flatnonzero(~rows.labels), np.flatnonzero(rows.labels))):
        shuffled = class_idx[rng.permutation(len(class_idx))]
        start = 0
        for f in range(k):
            take = int(allocation[f, cls])
            fold_members[f].append(shuffled[start : start + take])
            start += take
    prov = rows.provenance
    pairs = []
    all_idx = np.arange(n)
    for f in range(k):
        val_idx = np.sort(np.concatenate(fold_members[f]))
        train_idx = np.setdiff1d(all_idx, val_idx, assume_unique=True)
        pairs.append(
            (
                rows.subset(train_idx, provenance=f"{prov}|fold{f}-train"),
                rows.subset(val_idx, provenance=f"{prov}|fold{f}-val"),
            )
        )
    return pairs


@dataclass(frozen=True)
class EvalReport:
    """Per-model metric block in the shape of the headline results table.

    ``mode`` records how the numbers were produced: "cv_mean" (mean over
    validation folds) or "holdout" (single held-out test set).
    """

    mode: str
    folds: int | None
    per_model: dict[str, Metrics]

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "folds": self.folds,
            "models": {name: m.as_dict() for name, m in self.per_model.items()},
        }

    def to_markdown(self) -> str:
        names = list(self.per_model)
        header = "| | " + " | ".join(MODEL_DISPLAY_NAMES.get(n, n) for n in names) + " |"
        sep = "|---" * (len(names) + 1) + "|"
        rows = [header, sep]
        metric_rows = [
            ("Accuracy", "accuracy"),
            ("Precision", "precision"),
            ("Recall", "recall"),
            ("F1-Measure", "f1"),
            ("Recall (micro avg)", "recall_micro"),
        ]
        for label, attr in metric_rows:
            cells = " | ".join(f"{getattr(self.per_model[n], attr):.3f}" for n in names)
            rows.append(f"| {label} | {cells} |")
        flagged = [n for n in names if self.per_model[n].degenerate]
        if flagged:
            rows.append("")
            rows.append(f"Degenerate (zero-division) metrics set to 0 for: {', '.join(flagged)}.")
        return "\n".join(rows)
