"""Shared builders used across the test suite."""

from __future__ import annotations

import numpy as np

from policycite.features import N_FEATURES, RecordSet


def embed(columns: dict[int, list[int]], labels) -> RecordSet:
    """RecordSet with the given per-feature columns; all other features 0.

    Lets a test state a low-dimensional scenario without writing out the
    full 11-wide matrix.
    """
    labels = np.asarray(labels, dtype=bool)
    values = np.zeros((labels.size, N_FEATURES), dtype=np.int64)
    for f, col in columns.items():
        values[:, f] = col
    return RecordSet(values, labels)


def random_counts(rng: np.random.Generator, n: int, high: int = 6) -> RecordSet:
    """Random small-count rows with random labels (both classes forced)."""
    values = rng.integers(0, high, size=(n, N_FEATURES))
    labels = rng.random(n) < 0.5
    labels[0], labels[1] = False, True  # both classes present
    return RecordSet(values, labels)


def separable_clusters(n: int, seed: int = 0, gap: int = 20) -> RecordSet:
    """Two tight count clusters, one per class, far apart on every feature.

    Within-cluster spread is +/-1 count, so the inter-cluster gap is a wide
    multiple of the within-class standard deviation and any reasonable
    classifier separates the classes perfectly.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    neg = rng.integers(0, 3, size=(half, N_FEATURES))
    pos = rng.integers(gap, gap + 3, size=(n - half, N_FEATURES))
    values = np.vstack([neg, pos])
    labels = np.repeat([False, True], [half, n - half])
    order = rng.permutation(n)
    return RecordSet(values[order], labels[order])


def as_row_multiset(rows: RecordSet) -> list[tuple]:
    """Sorted (values..., label) tuples, for multiset comparisons."""
    return sorted(
        tuple(int(v) for v in rows.values[i]) + (bool(rows.labels[i]),)
        for i in range(len(rows))
    )
