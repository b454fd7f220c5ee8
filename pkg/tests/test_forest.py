"""CART trees, bagged forests and Gini feature importance."""

from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

from helpers import embed, separable_clusters
from policycite.errors import FitError, ImportanceError
from policycite.features import N_FEATURES, RecordSet
from policycite.forest import RandomForest, Tree, best_split, fit_tree, gini


def _check_importances(forest: RandomForest) -> np.ndarray:
    """Normalization contract, asserted on every forest this file fits."""
    imp = forest.feature_importances()
    assert imp.shape == (N_FEATURES,)
    assert np.all(imp >= 0)
    assert imp.sum() == pytest.approx(1.0, abs=1e-9)
    return imp


def _contradiction_free(n: int, seed: int) -> RecordSet:
    """Random rows labeled by a pure function of the feature values, so no
    two identical rows ever disagree on the label."""
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 4, size=(n, N_FEATURES))
    w = np.arange(1, N_FEATURES + 1)
    labels = (values @ w) % 3 > 0
    if labels.all() or not labels.any():
        raise AssertionError("degenerate labeling; pick another seed")
    return RecordSet(values, labels)


def _reference_tree(values: np.ndarray, labels: np.ndarray) -> dict:
    """Plain recursive CART on top of best_split, in serialized-node form.

    Serves as an independent oracle for the batched tree grower: both must
    produce the identical structure, thresholds and decreases.
    """
    n = labels.size
    pos = int(np.count_nonzero(labels))
    node: dict = {"n_samples": n, "counts": [n - pos, pos]}
    split = best_split(values, labels, range(N_FEATURES)) if n >= 2 else None
    if split is None:
        node["kind"] = "leaf"
        return node
    f, threshold, gain = split
    node["kind"] = "split"
    node["feature"] = f
    node["threshold"] = threshold
    node["decrease"] = gain
    go_left = values[:, f] <= threshold
    node["left"] = _reference_tree(values[go_left], labels[go_left])
    node["right"] = _reference_tree(values[~go_left], labels[~go_left])
    return node


class TestGini:
    def test_balanced_pair_is_half(self):
        assert gini((5, 5)) == 0.5

    def test_pure_node_is_zero(self):
        assert gini((10, 0)) == 0.0

    def test_three_one(self):
        assert gini((3, 1)) == pytest.approx(0.375, abs=1e-12)

    def test_empty_node_rejected(self):
        with pytest.raises(ValueError):
            gini((0, 0))

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            gini((-1, 3))

    def test_range(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            neg, pos = int(rng.integers(0, 50)), int(rng.integers(0, 50))
            if neg + pos == 0:
                continue
            assert 0.0 <= gini((neg, pos)) <= 0.5


class TestBestSplit:
    def test_single_candidate_split(self):
        """Two zeros labeled negative, one five labeled positive."""
        values = np.zeros((3, N_FEATURES), dtype=np.int64)
        values[2, 0] = 5
        labels = np.array([False, False, True])
        f, threshold, gain = best_split(values, labels, range(N_FEATURES))
        assert f == 0
        assert threshold == 2.5
        assert gain == pytest.approx(4 / 9, abs=1e-12)

    def test_identical_rows_mixed_labels_has_no_split(self):
        values = np.ones((4, N_FEATURES), dtype=np.int64)
        labels = np.array([True, False, True, False])
        assert best_split(values, labels, range(N_FEATURES)) is None

    def test_pure_node_has_no_split(self):
        rng = np.random.default_rng(0)
        values = rng.integers(0, 5, size=(6, N_FEATURES))
        assert best_split(values, np.ones(6, dtype=bool), range(N_FEATURES)) is None

    def test_split_to_pure_children_recovers_parent_gini(self):
        """Parent (3,1) split into pure children: decrease = 0.375."""
        rows = embed({2: [1, 1, 1, 5]}, [False, False, False, True])
        f, threshold, gain = best_split(rows.values, rows.labels, range(N_FEATURES))
        assert f == 2
        assert threshold == 3.0
        assert gain == pytest.approx(0.375, abs=1e-12)

    def test_feature_tie_breaks_to_lower_index(self):
        rows = embed({3: [0, 1], 7: [0, 1]}, [False, True])
        f, _, _ = best_split(rows.values, rows.labels, range(N_FEATURES))
        assert f == 3

    def test_threshold_tie_breaks_to_lower_value(self):
        # thresholds 0.5 and 1.5 both yield the same decrease
        rows = embed({0: [0, 1, 2]}, [True, False, True])
        f, threshold, gain = best_split(rows.values, rows.labels, range(N_FEATURES))
        assert f == 0
        assert threshold == 0.5
        assert gain == pytest.approx(4 / 9 - 1 / 3, abs=1e-12)

    def test_candidate_set_is_respected(self):
        rows = embed({0: [0, 1], 5: [0, 1]}, [False, True])
        f, _, _ = best_split(rows.values, rows.labels, [5])
        assert f == 5

    def test_thresholds_are_midpoints_of_observed_values(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            values = rng.integers(0, 6, size=(12, N_FEATURES))
            labels = rng.random(12) < 0.5
            split = best_split(values, labels, range(N_FEATURES))
            if split is None:
                continue
            f, threshold, _ = split
            uniq = np.unique(values[:, f])
            midpoints = (uniq[:-1] + uniq[1:]) / 2.0
            assert threshold in midpoints


class TestFitTree:
    def test_single_row_is_a_leaf(self):
        tree = fit_tree(embed({0: [3]}, [True]))
        assert tree.n_nodes == 1
        assert tree.node().is_leaf

    def test_pure_input_is_a_leaf(self):
        tree = fit_tree(embed({0: [1, 2, 3]}, [False, False, False]))
        assert tree.n_nodes == 1

    def test_separable_one_feature_data_gives_depth_one(self):
        rows = embed({4: [0, 1, 2, 10, 11, 12]}, [False] * 3 + [True] * 3)
        tree = fit_tree(rows)
        assert tree.depth == 1
        assert np.array_equal(tree.predict_freq(rows.values) > 0.5, rows.labels)

    def test_memorizes_contradiction_free_data(self):
        rows = _contradiction_free(200, seed=3)
        tree = fit_tree(rows)
        predicted = tree.predict_freq(rows.values) > 0.5
        assert np.array_equal(predicted, rows.labels)

    def test_matches_recursive_reference_exactly(self):
        """The batched grower must equal plain recursive CART, float for
        float, on a spread of random datasets."""
        rng = np.random.default_rng(42)
        for _ in range(15):
            n = int(rng.integers(5, 60))
            values = rng.integers(0, int(rng.integers(2, 7)), size=(n, N_FEATURES))
            labels = rng.random(n) < float(rng.uniform(0.2, 0.8))
            rows = RecordSet(np.abs(values), labels)
            tree = fit_tree(rows, max_features="all")
            assert tree.to_dict() == _reference_tree(rows.values, rows.labels)

    def test_children_counts_sum_to_parent(self):
        rows = _contradiction_free(150, seed=9)
        tree = fit_tree(rows)

        def walk(node: dict):
            if node["kind"] == "leaf":
                return
            assert node["decrease"] >= 0
            left, right = node["left"], node["right"]
            assert left["n_samples"] + right["n_samples"] == node["n_samples"]
            assert [
                left["counts"][0] + right["counts"][0],
                left["counts"][1] + right["counts"][1],
            ] == node["counts"]
            walk(left)
            walk(right)

        walk(tree.to_dict())

    def test_deterministic_with_candidate_sampling(self):
        rows = _contradiction_free(80, seed=5)
        a = fit_tree(rows, seed=123, max_features="sqrt")
        b = fit_tree(rows, seed=123, max_features="sqrt")
        assert a.to_dict() == b.to_dict()

    def test_tree_serialization_round_trip(self):
        rows = _contradiction_free(60, seed=7)
        tree = fit_tree(rows)
        again = Tree.from_dict(json.loads(json.dumps(tree.to_dict())))
        assert again.to_dict() == tree.to_dict()
        grid = rows.values
        np.testing.assert_allclose(again.predict_freq(grid), tree.predict_freq(grid), atol=0)


class TestForest:
    def test_single_tree_without_bootstrap_equals_fit_tree_on_a_grid(self):
        rows = _contradiction_free(120, seed=11)
        forest = RandomForest.fit(rows, n_trees=1, max_features="all", seed=0, bootstrap=False)
        tree = fit_tree(rows, max_features="all")
        grid_rows = np.zeros((5**2, N_FEATURES), dtype=np.int64)
        for i, (a, b) in enumerate(itertools.product(range(5), repeat=2)):
            grid_rows[i, 0], grid_rows[i, 1] = a, b
        grid = RecordSet(grid_rows, np.zeros(len(grid_rows), dtype=bool))
        np.testing.assert_allclose(
            forest.predict_proba(grid), tree.predict_freq(grid.values), atol=0
        )
        _check_importances(forest)

    def test_unanimous_vote(self):
        leaf_pos = {"kind": "leaf", "n_samples": 3, "counts": [0, 3]}
        tree = Tree.from_dict(leaf_pos)
        forest = RandomForest([tree, tree], max_features="all", seed=0)
        rows = embed({0: [1]}, [False])
        assert forest.predict(rows).tolist() == [True]

    def test_exact_tie_falls_to_negative(self):
        pos = Tree.from_dict({"kind": "leaf", "n_samples": 2, "counts": [0, 2]})
        neg = Tree.from_dict({"kind": "leaf", "n_samples": 2, "counts": [2, 0]})
        forest = RandomForest([pos, neg], max_features="all", seed=0)
        rows = embed({0: [1]}, [False])
        assert forest.predict_proba(rows).tolist() == [0.5]
        assert forest.predict(rows).tolist() == [False]

    def test_training_accuracy_on_separable_clusters(self):
        rows = separable_clusters(500, seed=19)
        forest = RandomForest.fit(rows, n_trees=100, seed=1)
        accuracy = float(np.mean(forest.predict(rows) == rows.labels))
        assert accuracy >= 0.99
        _check_importances(forest)

    def test_deterministic_serialization(self):
        rows = _contradiction_free(90, seed=13)
        a = RandomForest.fit(rows, n_trees=8, seed=77)
        b = RandomForest.fit(rows, n_trees=8, seed=77)
        assert a.to_dict() == b.to_dict()
        _check_importances(a)

    def test_single_class_rejected(self):
        with pytest.raises(FitError):
            RandomForest.fit(embed({0: [1, 2]}, [True, True]), n_trees=2)

    def test_zero_trees_rejected(self):
        with pytest.raises(FitError):
            RandomForest.fit(embed({0: [0, 1]}, [False, True]), n_trees=0)

    def test_bad_max_features_rejected(self):
        rows = embed({0: [0, 1]}, [False, True])
        for bad in (0, N_FEATURES + 1, "log2", True):
            with pytest.raises(FitError):
                RandomForest.fit(rows, n_trees=1, max_features=bad)


class TestImportance:
    def test_single_split_feature_takes_all_importance(self):
        rows = embed({6: [0, 0, 0, 9, 9, 9]}, [False] * 3 + [True] * 3)
        forest = RandomForest.fit(rows, n_trees=3, max_features="all", seed=0, bootstrap=False)
        imp = _check_importances(forest)
        assert imp[6] == pytest.approx(1.0, abs=1e-12)
        assert np.count_nonzero(imp) == 1

    def test_duplicating_trees_changes_nothing(self):
        rows = _contradiction_free(100, seed=4)
        forest = RandomForest.fit(rows, n_trees=5, seed=3)
        doubled = RandomForest(forest.trees * 2, max_features="sqrt", seed=3)
        np.testing.assert_allclose(
            _check_importances(doubled), _check_importances(forest), atol=1e-15
        )

    def test_forest_with_no_splits_raises(self):
        leaf = Tree.from_dict({"kind": "leaf", "n_samples": 4, "counts": [4, 0]})
        forest = RandomForest([leaf], max_features="all", seed=0)
        with pytest.raises(ImportanceError):
            forest.feature_importances()

    def test_normalization_across_random_forests(self):
        rng = np.random.default_rng(50)
        for trial in range(5):
            n = int(rng.integers(30, 120))
            values = rng.integers(0, 6, size=(n, N_FEATURES))
            labels = rng.random(n) < 0.5
            labels[0], labels[1] = True, False
            forest = RandomForest.fit(
                RecordSet(values, labels), n_trees=4 + trial, seed=trial
            )
            _check_importances(forest)


class TestForestSerialization:
    def test_round_trip_preserves_predictions(self):
        rows = _contradiction_free(70, seed=21)
        forest = RandomForest.fit(rows, n_trees=6, seed=9)
        data = json.loads(json.dumps(forest.to_dict()))
        again = RandomForest.from_dict(data)
        np.testing.assert_allclose(again.predict_proba(rows), forest.predict_proba(rows), atol=0)
        np.testing.assert_allclose(
            again.feature_importances(), forest.feature_importances(), atol=0
        )
        assert again.to_dict() == forest.to_dict()

    def test_dict_shape(self):
        rows = embed({0: [0, 1, 0, 1], 1: [1, 1, 0, 0]}, [False, True, False, True])
        forest = RandomForest.fit(rows, n_trees=2, seed=0)
        data = forest.to_dict()
        assert data["model"] == "rf"
        assert data["params"]["n_trees"] == 2
        assert data["params"]["min_samples_split"] == 2
        assert data["params"]["max_depth"] is None
        assert len(data["trees"]) == 2
        root = data["trees"][0]
        assert root["kind"] in ("leaf", "split")

    def test_empty_forest_rejected(self):
        with pytest.raises(ValueError):
            RandomForest.from_dict(
                {"model": "rf", "params": {"max_features": "sqrt"}, "seed": 0, "trees": []}
            )
