import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confens.forest import (
    Forest,
    ForestError,
    fit_forest,
    fit_tree,
    forest_from_json,
    forest_to_json,
    kfold_partition,
    predict_forest,
    predict_forest_matrix,
    predict_tree,
)
from confens.mlp import rmse


from helpers_oracles import oracle_predict, oracle_tree  # noqa: E402


class TestFitTree:
    def test_single_instance_leaf(self):
        tree = fit_tree(np.array([[0.0, 1.0]]), np.array([5.5]))
        assert tree.is_leaf and tree.value == 5.5

    def test_perfect_single_feature_split(self):
        X = np.array([[0, 0, 0, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 1, 1, 1]], dtype=float)
        y = np.array([4.0, 4.0, 8.0, 8.0])  # determined by b2
        tree = fit_tree(X, y)
        assert tree.feature == 2
        assert tree.left.is_leaf and tree.left.value == 4.0
        assert tree.right.is_leaf and tree.right.value == 8.0

    def test_duplicate_rows_with_different_targets_become_mean_leaf(self):
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        y = np.array([2.0, 6.0])
        tree = fit_tree(X, y)
        assert tree.is_leaf and tree.value == 4.0

    def test_thresholds_are_half(self):
        rng = np.random.default_rng(0)
        X = (rng.random((30, 5)) < 0.5).astype(float)
        y = rng.integers(0, 16, 30) / 8.0
        stack = [fit_tree(X, y)]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                assert node.threshold == 0.5
                stack.extend([node.left, node.right])

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(80):
            n = int(rng.integers(1, 13))
            d = int(rng.integers(1, 5))
            X = (rng.random((n, d)) < 0.5).astype(float)
            y = rng.integers(0, 32, n) / 8.0  # dyadic: exact arithmetic both sides
            tree = fit_tree(X, y)
            ref = oracle_tree([tuple(int(v) for v in row) for row in X], list(y))
            for bits in itertools.product((0.0, 1.0), repeat=d):
                x = np.array(bits)
                assert predict_tree(tree, x) == oracle_predict(ref, bits)

    def test_in_bag_fit_beats_constant_predictor(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(2, 40))
            X = (rng.random((n, 6)) < 0.5).astype(float)
            y = rng.normal(0, 1, n)
            tree = fit_tree(X, y)
            preds = np.array([predict_tree(tree, x) for x in X])
            assert rmse(preds, y) <= rmse(np.full(n, y.mean()), y) + 1e-12


class TestFitForest:
    def test_single_instance_forest(self):
        f = fit_forest(np.array([[1.0]]), np.array([3.0]), n_trees=5, seed=1)
        assert all(t.is_leaf and t.value == 3.0 for t in f.trees)

    def test_determinism(self):
        rng = np.random.default_rng(3)
        X = (rng.random((25, 4)) < 0.5).astype(float)
        y = rng.normal(0, 1, 25)
        f1 = fit_forest(X, y, n_trees=20, seed=9)
        f2 = fit_forest(X, y, n_trees=20, seed=9)
        assert forest_to_json(f1) == forest_to_json(f2)

    def test_bootstrap_sample_size_is_n(self):
        # replay the recorded per-tree seeds: each draws exactly n indices
        rng = np.random.default_rng(5)
        X = (rng.random((17, 3)) < 0.5).astype(float)
        y = rng.normal(0, 1, 17)
        f = fit_forest(X, y, n_trees=4, seed=2)
        assert f.n_trees == 4
        for s in f.bootstrap_seeds:
            idx = np.random.default_rng(s).integers(0, 17, 17)
            assert idx.size == 17

    def test_tree_count_matches_config(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([1.0, 2.0])
        assert fit_forest(X, y, n_trees=7, seed=0).n_trees == 7


class TestPredictForest:
    def test_identical_trees_zero_std(self):
        f = fit_forest(np.array([[1.0]]), np.array([3.0]), n_trees=6, seed=1)
        mean, std, per_tree = predict_forest(f, np.array([1.0]))
        assert (mean, std) == (3.0, 0.0)
        assert per_tree.tolist() == [3.0] * 6

    def test_population_std_convention(self):
        from confens.forest import TreeNode

        f = Forest(trees=[TreeNode(value=4.0), TreeNode(value=8.0)], bootstrap_seeds=(0, 1), d=2)
        mean, std, per_tree = predict_forest(f, np.array([0.0, 1.0]))
        assert mean == 6.0 and std == 2.0

    def test_matrix_mean_matches_scalar_path(self):
        rng = np.random.default_rng(11)
        X = (rng.random((20, 4)) < 0.5).astype(float)
        y = rng.normal(0, 1, 20)
        f = fit_forest(X, y, n_trees=15, seed=4)
        matrix = predict_forest_matrix(f, X)
        for j in range(5):
            mean, std, per_tree = predict_forest(f, X[j])
            assert np.array_equal(matrix[:, j], per_tree)
            assert matrix[:, j].mean() == mean

    def test_dimension_mismatch(self):
        f = fit_forest(np.array([[1.0, 0.0]]), np.array([3.0]), n_trees=2, seed=0)
        with pytest.raises(ForestError):
            predict_forest(f, np.array([1.0]))


class TestKfold:
    def test_even_folds(self):
        folds = kfold_partition(list(range(100)), k=10, seed=0)
        assert [len(f) for f in folds] == [10] * 10

    def test_uneven_fold_sizes_differ_by_at_most_one(self):
        folds = kfold_partition(list(range(23)), k=10, seed=1)
        sizes = sorted((len(f) for f in folds), reverse=True)
        assert sizes == [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]

    def test_every_index_exactly_once(self):
        idx = list(range(40, 77))
        folds = kfold_partition(idx, k=10, seed=3)
        combined = sorted(np.concatenate(folds).tolist())
        assert combined == idx

    def test_too_few_instances(self):
        with pytest.raises(ForestError):
            kfold_partition(list(range(5)), k=10, seed=0)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(min_value=10, max_value=300),
        k=st.integers(min_value=2, max_value=10),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_partition_property(self, n, k, seed):
        idx = list(range(100, 100 + n))
        folds = kfold_partition(idx, k=k, seed=seed)
        assert len(folds) == k
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(np.concatenate(folds).tolist()) == idx


class TestSerialization:
    def test_round_trip_preserves_predictions(self):
        rng = np.random.default_rng(13)
        X = (rng.random((30, 5)) < 0.5).astype(float)
        y = rng.normal(0, 1, 30)
        f = fit_forest(X, y, n_trees=10, seed=6)
        g = forest_from_json(forest_to_json(f))
        assert np.array_equal(predict_forest_matrix(f, X), predict_forest_matrix(g, X))
        assert g.bootstrap_seeds == f.bootstrap_seeds
