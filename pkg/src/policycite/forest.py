"""CART decision trees and a bagged random forest with Gini importance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FitError, ImportanceError
from .features import FEATURE_ORDER, N_FEATURES, RecordSet

DEFAULT_N_TREES = 100

_LEAF = -1


def gini(class_counts: Sequence[int]) -> float:
    """Gini impurity 1 - sum(p^2) of a (negative, positive) count pair."""
    neg, pos = class_counts
    if neg < 0 or pos < 0:
        raise ValueError(f"class counts must be non-negative, got ({neg}, {pos})")
    n = neg + pos
    if n == 0:
        raise ValueError("gini of an empty node is undefined")
    return float(1.0 - (np.square(pos / n) + np.square(neg / n)))


def _resolve_max_features(max_features: int | str) -> int:
    """Number of candidate features drawn per node."""
    if max_features == "all":
        return N_FEATURES
    if max_features == "sqrt":
        return math.ceil(math.sqrt(N_FEATURES))
    if isinstance(max_features, int) and not isinstance(max_features, bool):
        if 1 <= max_features <= N_FEATURES:
            return max_features
    raise FitError(
        f'max_features must be "sqrt", "all" or an int in [1, {N_FEATURES}], got {max_features!r}'
    )


def _split_gains(
    n_left: np.ndarray,
    pos_left: np.ndarray,
    n_total: np.ndarray | float,
    pos_total: np.ndarray | float,
    parent_gini: np.ndarray | float,
) -> np.ndarray:
    """Gini decrease for splits described by left-side counts.

    All count arguments must already be float64; entries with an empty side
    produce nan and must be masked by the caller.
    """
    n_right = n_total - n_left
    pos_right = pos_total - pos_left
    neg_left = n_left - pos_left
    neg_right = n_right - pos_right
    with np.errstate(divide="ignore", invalid="ignore"):
        g_left = 1.0 - (np.square(pos_left / n_left) + np.square(neg_left / n_left))
        g_right = 1.0 - (np.square(pos_right / n_right) + np.square(neg_right / n_right))
        return parent_gini - (n_left * g_left + n_right * g_right) / n_total


def best_split(
    values: np.ndarray, labels: np.ndarray, candidates: Iterable[int]
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gini decrease) over the candidate features.

    Thresholds are midpoints between consecutive distinct values observed at
    the node. Ties break toward the lower feature index, then the lower
    threshold. Returns None when no split has a positive decrease.
    """
    labels = np.asarray(labels, dtype=bool)
    n = labels.size
    pos_total = int(np.count_nonzero(labels))
    if n < 2 or pos_total == 0 or pos_total == n:
        return None
    parent = 1.0 - (np.square(pos_total / n) + np.square((n - pos_total) / n))
    best: tuple[float, int, float] | None = None
    for f in sorted(set(candidates)):
        uniq, inv = np.unique(values[:, f], return_inverse=True)
        if uniq.size < 2:
            continue
        tot_hist = np.bincount(inv, minlength=uniq.size).astype(np.float64)
        pos_hist = np.bincount(inv[labels], minlength=uniq.size).astype(np.float64)
        n_left = np.cumsum(tot_hist)[:-1]
        pos_left = np.cumsum(pos_hist)[:-1]
        gains = _split_gains(n_left, pos_left, float(n), float(pos_total), parent)
        r = int(np.argmax(gains))  # first maximum, i.e. the lowest threshold
        gain = float(gains[r])
        if best is None or gain > best[0]:
            threshold = float(uniq[r] + uniq[r + 1]) / 2.0
            best = (gain, f, threshold)
    if best is None or best[0] <= 0.0:
        return None
    gain, f, threshold = best
    return f, threshold, gain


@dataclass(frozen=True)
class TreeNode:
    """Nested read-only view of one tree node."""

    n_samples: int
    counts: tuple[int, int]  # (negative, positive)
    feature: int | None = None
    threshold: float | None = None
    left: TreeNode | None = None
    right: TreeNode | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


class Tree:
    """A fitted CART tree stored as flat parallel arrays.

    ``feature[i] == -1`` marks node i as a leaf; internal nodes carry the
    split feature, threshold and child slots. ``x[feature] <= threshold``
    routes to the left child.
    """

    def __init__(
        self,
        feature: np.ndarray,
        threshold: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        n_samples: np.ndarray,
        pos: np.ndarray,
        gain: np.ndarray,
    ) -> None:
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.n_samples = n_samples
        self.pos = pos
        self.gain = gain
        for arr in (feature, threshold, left, right, n_samples, pos, gain):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != _LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict_freq(self, values: np.ndarray) -> np.ndarray:
        """Positive-class training frequency of the leaf each row lands in."""
        node = np.zeros(values.shape[0], dtype=np.int64)
        while True:
            live = np.flatnonzero(self.feature[node] != _LEAF)
            if live.size == 0:
                break
            cur = node[live]
            f = self.feature[cur]
            go_left = values[live, f] <= self.threshold[cur]
            node[live] = np.where(go_left, self.left[cur], self.right[cur])
        return self.pos[node] / self.n_samples[node]

    def node(self, index: int = 0) -> TreeNode:
        """Materialize the nested node view rooted at ``index``."""
        # Children always have larger slots than their parent, so one reverse
        # sweep builds every subtree before its parent needs it.
        built: dict[int, TreeNode] = {}
        for i in range(self.n_nodes - 1, -1, -1):
            counts = (int(self.n_samples[i] - self.pos[i]), int(self.pos[i]))
            if self.feature[i] == _LEAF:
                built[i] = TreeNode(n_samples=int(self.n_samples[i]), counts=counts)
            else:
                built[i] = TreeNode(
                    n_samples=int(self.n_samples[i]),
                    counts=counts,
                    feature=int(self.feature[i]),
                    threshold=float(self.threshold[i]),
                    left=built[int(self.left[i])],
                    right=built[int(self.right[i])],
                )
        return built[index]

    def to_dict(self, feature_names: bool = False) -> dict:
        """Nested node objects; ``feature_names=True`` swaps indices for names
        (pretty-print form, not meant to be parsed back)."""
        out: dict[int, dict] = {}
        # Children always have larger slots, so the reverse sweep finishes
        # every subtree before its parent consumes it.
        for i in range(self.n_nodes - 1, -1, -1):
            entry: dict = {
                "n_samples": int(self.n_samples[i]),
                "counts": [int(self.n_samples[i] - self.pos[i]), int(self.pos[i])],
            }
            if self.feature[i] == _LEAF:
                entry["kind"] = "leaf"
            else:
                f = int(self.feature[i])
                entry["kind"] = "split"
                entry["feature"] = FEATURE_ORDER[f] if feature_names else f
                entry["threshold"] = float(self.threshold[i])
                entry["decrease"] = float(self.gain[i])
                entry["left"] = out.pop(int(self.left[i]))
                entry["right"] = out.pop(int(self.right[i]))
            out[i] = entry
        return out[0]

    @classmethod
    def from_dict(cls, data: dict) -> Tree:
        feature, threshold, left, right, n_samples, pos, gain = [], [], [], [], [], [], []
        stack = [(data, None, None)]  # (node dict, parent slot, side)
        while stack:
            node, parent, side = stack.pop()
            slot = len(feature)
            if parent is not None:
                (left if side == "left" else right)[parent] = slot
            n = int(node["n_samples"])
            n_samples.append(n)
            pos.append(int(node["counts"][1]))
            if node["kind"] == "leaf":
                feature.append(_LEAF)
                threshold.append(0.0)
                left.append(_LEAF)
                right.append(_LEAF)
                gain.append(0.0)
            else:
                feature.append(int(node["feature"]))
                threshold.append(float(node["threshold"]))
                left.append(_LEAF)
                right.append(_LEAF)
                gain.append(float(node["decrease"]))
                # Right is pushed first so the left subtree is materialized
                # first, matching the fit-time slot layout.
                stack.append((node["right"], slot, "right"))
                stack.append((node["left"], slot, "left"))
        return cls(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            n_samples=np.asarray(n_samples, dtype=np.int64),
            pos=np.asarray(pos, dtype=np.int64),
            gain=np.asarray(gain, dtype=np.float64),
        )


def _grow(
    values: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator | None,
    n_candidates: int,
) -> Tree:
    """Level-wise histogram tree grower.

    Processes every node of a depth level in one vectorized pass per feature,
    which keeps per-node Python overhead off the hot path. Node-level results
    are identical to applying best_split recursively; candidate features are
    drawn per splittable node in slot order when n_candidates < the feature
    count (no generator draws happen otherwise).
    """
    n = labels.size
    ranks = np.empty((n, N_FEATURES), dtype=np.int64)
    uniqs: list[np.ndarray] = []
    for f in range(N_FEATURES):
        u, inv = np.unique(values[:, f], return_inverse=True)
        uniqs.append(u)
        ranks[:, f] = inv

    feature = [np.int64(_LEAF)]
    threshold = [np.float64(0.0)]
    left = [np.int64(_LEAF)]
    right = [np.int64(_LEAF)]
    n_samples = [np.int64(0)]
    pos = [np.int64(0)]
    gain = [np.float64(0.0)]

    node_of_row = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    frontier_start = 0
    n_slots = 1
    while n_slots:
        slot = node_of_row[active] - frontier_start
        n_node = np.bincount(slot, minlength=n_slots).astype(np.float64)
        pos_node = np.bincount(slot[labels[active]], minlength=n_slots).astype(np.float64)
        for s in range(n_slots):
            n_samples[frontier_start + s] = np.int64(n_node[s])
            pos[frontier_start + s] = np.int64(pos_node[s])
        parent = 1.0 - (np.square(pos_node / n_node) + np.square((n_node - pos_node) / n_node))
        splittable = (n_node >= 2) & (pos_node > 0) & (pos_node < n_node)
        if not splittable.any():
            break

        if n_candidates < N_FEATURES:
            cand_mask = np.zeros((n_slots, N_FEATURES), dtype=bool)
            for s in np.flatnonzero(splittable):
                cand_mask[s, rng.choice(N_FEATURES, size=n_candidates, replace=False)] = True
        else:
            cand_mask = np.ones((n_slots, N_FEATURES), dtype=bool)

        best_gain = np.full(n_slots, -np.inf)
        best_feature = np.full(n_slots, _LEAF, dtype=np.int64)
        best_rank = np.zeros(n_slots, dtype=np.int64)
        pos_rows = labels[active]
        for f in range(N_FEATURES):
            v = uniqs[f].size
            if v < 2:
                continue
            key = slot * v + ranks[active, f]
            tot = np.bincount(key, minlength=n_slots * v).reshape(n_slots, v).astype(np.float64)
            phist = (
                np.bincount(key[pos_rows], minlength=n_slots * v)
                .reshape(n_slots, v)
                .astype(np.float64)
            )
            n_left = np.cumsum(tot, axis=1)
            pos_left = np.cumsum(phist, axis=1)
            gains = _split_gains(
                n_left, pos_left, n_node[:, None], pos_node[:, None], parent[:, None]
            )
            valid = (tot > 0) & (n_left < n_node[:, None]) & splittable[:, None]
            valid &= cand_mask[:, f][:, None]
            gains = np.where(valid, gains, -np.inf)
            r = np.argmax(gains, axis=1)
            g = gains[np.arange(n_slots), r]
            better = g > best_gain
            best_gain[better] = g[better]
            best_feature[better] = f
            best_rank[better] = r[better]

        do_split = splittable & (best_gain > 0.0)
        if not do_split.any():
            break
        order = np.argsort(slot, kind="stable")
        rows_sorted = active[order]
        bounds = np.searchsorted(slot[order], np.arange(n_slots + 1))
        next_start = len(feature)
        next_id = next_start
        for s in np.flatnonzero(do_split):
            rows = rows_sorted[bounds[s] : bounds[s + 1]]
            f = int(best_feature[s])
            r = int(best_rank[s])
            row_ranks = ranks[rows, f]
            go_left = row_ranks <= r
            t_high = uniqs[f][row_ranks[~go_left].min()]
            nid = frontier_start + s
            feature[nid] = np.int64(f)
            threshold[nid] = np.float64(float(uniqs[f][r] + t_high) / 2.0)
            left[nid] = np.int64(next_id)
            right[nid] = np.int64(next_id + 1)
            gain[nid] = np.float64(best_gain[s])
            node_of_row[rows[go_left]] = next_id
            node_of_row[rows[~go_left]] = next_id + 1
            next_id += 2
            for _ in range(2):
                feature.append(np.int64(_LEAF))
                threshold.append(np.float64(0.0))
                left.append(np.int64(_LEAF))
                right.append(np.int64(_LEAF))
                n_samples.append(np.int64(0))
                pos.append(np.int64(0))
                gain.append(np.float64(0.0))

        active = active[do_split[slot]]
        frontier_start = next_start
        n_slots = next_id - next_start

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        pos=np.asarray(pos, dtype=np.int64),
        gain=np.asarray(gain, dtype=np.float64),
    )


def fit_tree(train: RecordSet, seed: int = 0, max_features: int | str = "all") -> Tree:
    """Fit a single CART tree on the full record set (no bootstrap)."""
    k = _resolve_max_features(max_features)
    rng = np.random.default_rng(seed) if k < N_FEATURES else None
    return _grow(train.values, train.labels, rng, k)


class RandomForest:
    """Bagging ensemble of CART trees with soft voting."""

    def __init__(self, trees: Sequence[Tree], max_features: int | str, seed: int) -> None:
        self.trees = tuple(trees)
        self.max_features = max_features
        self.seed = seed

    @classmethod
    def fit(
        cls,
        train: RecordSet,
        n_trees: int = DEFAULT_N_TREES,
        max_features: int | str = "sqrt",
        seed: int = 0,
        bootstrap: bool = True,
    ) -> RandomForest:
        """Fit ``n_trees`` trees, each on a bootstrap sample of size n drawn
        with a sub-seed derived from (seed, tree index).

        ``bootstrap=False`` is a test hook that trains every tree on the full
        input instead.
        """
        if n_trees < 1:
            raise FitError(f"a forest needs at least one tree, got {n_trees}")
        neg, pos = train.class_counts()
        if neg == 0 or pos == 0:
            raise FitError(f"training data must contain both classes, got ({neg}, {pos})")
        k = _resolve_max_features(max_features)
        n = len(train)
        trees = []
        for i in range(n_trees):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
            if bootstrap:
                boot = rng.integers(0, n, size=n)
                trees.append(_grow(train.values[boot], train.labels[boot], rng, k))
            else:
                trees.append(_grow(train.values, train.labels, rng, k))
        return cls(trees, max_features=max_features, seed=seed)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, rows: RecordSet) -> np.ndarray:
        """Mean positive leaf frequency over all trees."""
        total = np.zeros(len(rows), dtype=np.float64)
        for tree in self.trees:
            total += tree.predict_freq(rows.values)
        return total / self.n_trees

    def predict(self, rows: RecordSet) -> np.ndarray:
        return self.predict_proba(rows) > 0.5  # tie goes to the negative class

    def feature_importances(self) -> np.ndarray:
        """Gini importance: node-size-weighted impurity decrease, normalized
        to sum to one over the whole forest."""
        total = np.zeros(N_FEATURES, dtype=np.float64)
        for tree in self.trees:
            internal = tree.feature != _LEAF
            np.add.at(
                total,
                tree.feature[internal],
                tree.n_samples[internal] * tree.gain[internal],
            )
        mass = total.sum()
        if mass <= 0.0:
            raise ImportanceError("no split produced an impurity decrease; importance undefined")
        return total / mass

    def to_dict(self) -> dict:
        return {
            "model": "rf",
            "params": {
                "n_trees": self.n_trees,
                "max_features": self.max_features,
                "min_samples_split": 2,
                "max_depth": None,
            },
            "seed": self.seed,
            "feature_order": list(FEATURE_ORDER),
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> RandomForest:
        trees = [Tree.from_dict(t) for t in data["trees"]]
        if not trees:
            raise ValueError("serialized forest contains no trees")
        return cls(trees, max_features=data["params"]["max_features"], seed=int(data["seed"]))
