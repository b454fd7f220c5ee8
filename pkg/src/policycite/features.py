"""Canonical data model: records, feature selection, labels, balancing.

Feature vectors are mention counts on eleven online sources, in a fixed
canonical order used by every matrix, report and CSV header in the
toolkit. The positive class label means "cited in at least one policy
document".
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    BalanceError,
    ParseError,
    SchemaError,
    ValidationError,
)

# Canonical feature order. The index of each name is stable across the
# whole system: matrices, model parameters, rankings and CSV headers.
FEATURE_ORDER: tuple[str, ...] = (
    "peer_review",
    "gplus",
    "reddit",
    "video",
    "twitter",
    "weibo",
    "mendeley",
    "wikipedia",
    "blogs",
    "facebook",
    "news",
)

N_FEATURES = len(FEATURE_ORDER)

# Sources that may appear in raw inputs but never become features:
# discontinued or near-empty platforms.
EXCLUDED_SOURCES: tuple[str, ...] = ("connotea", "pinterest", "stackoverflow")

KNOWN_SOURCES: frozenset[str] = frozenset(FEATURE_ORDER) | frozenset(EXCLUDED_SOURCES)

# Raw-file schema: id column, all sources, then the policy citation count.
RAW_COLUMNS: tuple[str, ...] = ("article_id", *FEATURE_ORDER, *EXCLUDED_SOURCES, "policy")
REQUIRED_COLUMNS: frozenset[str] = frozenset({"article_id", "policy"})

_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_ORDER)}


@dataclass(frozen=True)
class ArticleRecord:
    """One article's per-source mention counts plus its policy citation count."""

    article_id: str
    mentions: Mapping[str, int]
    policy_count: int

    def __post_init__(self):
        if not self.article_id:
            raise ValidationError("article_id must be non-empty")
        for source, count in self.mentions.items():
            if source not in KNOWN_SOURCES:
                raise ValidationError(f"unknown mention source {source!r}")
            if count < 0:
                raise ValidationError(f"negative count for {source!r}: {count}")
        if self.policy_count < 0:
            raise ValidationError(f"negative policy count: {self.policy_count}")


@dataclass(frozen=True)
class FeatureVector:
    """An 11-count vector in FEATURE_ORDER with its binary class label."""

    values: tuple[int, ...]
    label: bool

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise ValidationError(f"expected {N_FEATURES} values, got {len(self.values)}")
        if any(v < 0 for v in self.values):
            raise ValidationError("feature counts must be non-negative")


class RecordSet:
    """Homogeneous, immutable collection of labeled feature vectors.

    Rows are stored as numpy arrays for the numeric code paths; iteration
    yields :class:`FeatureVector` rows. ``provenance`` is a free-text note
    (file path or generator description) carried along for reports.
    """

    def __init__(self, values: np.ndarray, labels: np.ndarray, provenance: str = ""):
        values = np.asarray(values, dtype=np.int64)
        labels = np.asarray(labels, dtype=bool)
        if values.ndim != 2 or values.shape[1] != N_FEATURES:
            raise ValidationError(f"values must have shape (n, {N_FEATURES})")
        if labels.shape != (values.shape[0],):
            raise ValidationError("labels must have one entry per row")
        if values.shape[0] == 0:
            raise ValidationError("a RecordSet must contain at least one row")
        if np.any(values < 0):
            raise ValidationError("feature counts must be non-negative")
        values.setflags(write=False)
        labels.setflags(write=False)
        self.values = values
        self.labels = labels
        self.provenance = provenance

    @classmethod
    def from_vectors(cls, rows: Iterable[FeatureVector], provenance: str = "") -> "RecordSet":
        rows = list(rows)
        values = np.array([r.values for r in rows], dtype=np.int64).reshape(len(rows), N_FEATURES)
        labels = np.array([r.label for r in rows], dtype=bool)
        return cls(values, labels, provenance)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self) -> Iterator[FeatureVector]:
        for i in range(len(self)):
            yield self.row(i)

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(tuple(int(v) for v in self.values[i]), bool(self.labels[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RecordSet):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(
            self.labels, other.labels
        )

    def class_counts(self) -> tuple[int, int]:
        """(negative, positive) row counts."""
        pos = int(np.count_nonzero(self.labels))
        return len(self) - pos, pos

    def subset(self, indices: np.ndarray, provenance: str = "") -> "RecordSet":
        indices = np.asarray(indices, dtype=np.int64)
        return RecordSet(
            self.values[indices], self.labels[indices], provenance or self.provenance
        )


def binarize_label(policy_count: int) -> bool:
    """Positive iff the article is cited in at least one policy document."""
    if policy_count < 0:
        raise ValidationError(f"negative policy count: {policy_count}")
    return policy_count >= 1


def select_features(record: ArticleRecord) -> np.ndarray:
    """Project a record onto the 11 canonical features, dropping excluded sources."""
    out = np.zeros(N_FEATURES, dtype=np.int64)
    for source, count in record.mentions.items():
        idx = _FEATURE_INDEX.get(source)
        if idx is not None:
            out[idx] = count
    return out


def records_to_set(records: Iterable[ArticleRecord], provenance: str = "") -> RecordSet:
    """Apply feature selection and label binarization to a batch of records."""
    records = list(records)
    values = np.zeros((len(records), N_FEATURES), dtype=np.int64)
    labels = np.zeros(len(records), dtype=bool)
    for i, rec in enumerate(records):
        values[i] = select_features(rec)
        labels[i] = binarize_label(rec.policy_count)
    return RecordSet(values, labels, provenance)


def _parse_count(raw, line: int, column: str, path) -> int:
    """Parse one count cell. Empty cells mean "no mentions recorded"."""
    if raw is None or raw == "":
        return 0
    if isinstance(raw, bool) or isinstance(raw, float):
        raise ParseError(f"{path}:{line}: column {column!r} must be an integer, got {raw!r}")
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ParseError(
            f"{path}:{line}: column {column!r} must be an integer, got {raw!r}"
        ) from None
    if value < 0:
        raise ValidationError(f"{path}:{line}: negative count in column {column!r}: {value}")
    return value


def _record_from_mapping(raw: Mapping, line: int, path) -> ArticleRecord:
    unknown = set(raw) - set(RAW_COLUMNS)
    if unknown:
        raise SchemaError(f"{path}:{line}: unknown columns {sorted(unknown)}")
    missing = REQUIRED_COLUMNS - set(raw)
    if missing:
        raise SchemaError(f"{path}:{line}: missing required columns {sorted(missing)}")
    article_id = str(raw["article_id"]) if raw["article_id"] is not None else ""
    if not article_id:
        raise ValidationError(f"{path}:{line}: article_id must be non-empty")
    mentions = {}
    for source in (*FEATURE_ORDER, *EXCLUDED_SOURCES):
        if source in raw:
            mentions[source] = _parse_count(raw[source], line, source, path)
    policy = _parse_count(raw["policy"], line, "policy", path)
    return ArticleRecord(article_id, mentions, policy)


def _load_csv(path: Path) -> list[ArticleRecord]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no header")
        header = list(reader.fieldnames)
        unknown = set(header) - set(RAW_COLUMNS)
        if unknown:
            raise SchemaError(f"{path}: unknown columns {sorted(unknown)}")
        missing = REQUIRED_COLUMNS - set(header)
        if missing:
            raise SchemaError(f"{path}: missing required columns {sorted(missing)}")
        records = []
        for row in reader:
            line = reader.line_num
            if row.get(None) is not None or any(v is None for v in row.values()):
                raise ParseError(f"{path}:{line}: malformed row (wrong number of cells)")
            records.append(_record_from_mapping(row, line, path))
    return records


def _load_jsonl(path: Path) -> list[ArticleRecord]:
    records = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from None
            if not isinstance(raw, dict):
                raise ParseError(f"{path}:{line_no}: expected a JSON object")
            records.append(_record_from_mapping(raw, line_no, path))
    return records


def load_records(path, format: str) -> list[ArticleRecord]:
    """Load raw article records from a CSV or JSONL file."""
    path = Path(path)
    try:
        if format == "csv":
            return _load_csv(path)
        if format == "jsonl":
            return _load_jsonl(path)
    except FileNotFoundError:
        raise ParseError(f"input file not found: {path}") from None
    raise SchemaError(f"unknown input format {format!r} (expected 'csv' or 'jsonl')")


def balance_indices(labels: np.ndarray, seed: int) -> np.ndarray:
    """Row indices implementing class balancing by undersampling.

    The minority class is fully retained; a uniform majority subset of the
    same size is drawn without replacement. The combined indices are then
    deterministically shuffled by ``seed``.
    """
    labels = np.asarray(labels, dtype=bool)
    pos = int(np.count_nonzero(labels))
    neg = int(labels.size - pos)
    if neg == 0 or pos == 0:
        raise BalanceError("both classes must be present to balance")
    rng = np.random.default_rng(seed)
    pos_idx = np.flatnonzero(labels)
    neg_idx = np.flatnonzero(~labels)
    if pos <= neg:
        minority, majority = pos_idx, neg_idx
    else:
        minority, majority = neg_idx, pos_idx
    keep = rng.choice(majority, size=len(minority), replace=False)
    combined = np.concatenate([minority, keep])
    return combined[rng.permutation(len(combined))]


def balance(rows: RecordSet, seed: int) -> RecordSet:
    """Equalize class counts by undersampling the majority class."""
    combined = balance_indices(rows.labels, seed)
    return rows.subset(combined, provenance=f"{rows.provenance}|balanced(seed={seed})")


def write_records_csv(records: Iterable[ArticleRecord], path) -> None:
    """Write article records in the raw CSV schema (excluded sources omitted)."""
    columns = ("article_id", *FEATURE_ORDER, "policy")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            writer.writerow(
                [rec.article_id]
                + [rec.mentions.get(f, 0) for f in FEATURE_ORDER]
                + [rec.policy_count]
            )


FEATURE_CSV_HEADER: tuple[str, ...] = (*FEATURE_ORDER, "label")


def write_feature_csv(rows: RecordSet, path) -> None:
    """Write a RecordSet as a feature-matrix CSV (11 counts + 0/1 label)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_CSV_HEADER)
        for values, label in zip(rows.values, rows.labels):
            writer.writerow([int(v) for v in values] + [int(label)])


def read_feature_csv(path) -> RecordSet:
    """Read a feature-matrix CSV produced by :func:`write_feature_csv`."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, no header")
        if tuple(header) != FEATURE_CSV_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(FEATURE_CSV_HEADER)}")
        values, labels = [], []
        for line_no, cells in enumerate(reader, start=2):
            if len(cells) != len(FEATURE_CSV_HEADER):
                raise ParseError(f"{path}:{line_no}: malformed row (wrong number of cells)")
            values.append(
                [_parse_count(c, line_no, FEATURE_ORDER[i], path) for i, c in enumerate(cells[:-1])]
            )
            raw_label = cells[-1]
            if raw_label not in ("0", "1"):
                raise ParseError(f"{path}:{line_no}: label must be 0 or 1, got {raw_label!r}")
            labels.append(raw_label == "1")
    if not values:
        raise ValidationError(f"{path}: no data rows")
    return RecordSet(np.array(values, dtype=np.int64), np.array(labels), provenance=str(path))
