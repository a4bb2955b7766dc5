"""Regression random forest built from scratch: bagged CART trees over
binary descriptors, with per-tree spread for interval normalization.

Splitter defaults follow common regression-forest practice: no depth limit,
minimum 2 instances to split, minimum 1 per leaf, every feature evaluated at
every node, variance-reduction criterion, bootstrap resampling per tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ConfensError
from .dataset import mix_seed


class ForestError(ConfensError, ValueError):
    pass


@dataclass
class TreeNode:
    """Internal node (``feature`` set, children present) or leaf (``value`` set).

    Thresholds are always 0.5: the only meaningful cut for 0/1 features.
    """

    feature: int | None = None
    threshold: float = 0.5
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def fit_tree(X: np.ndarray, y: np.ndarray, rng_seed: int | None = None) -> TreeNode:
    """Greedy CART regression tree.

    At each node every feature's 0/1 split is scored by variance reduction
    (equivalently, by the between-group sum of squares
    ``n0*n1/n * (mean0 - mean1)^2``); ties go to the lowest feature index and
    zero-gain splits are not taken, so duplicate rows terminate in a leaf
    holding their mean. ``rng_seed`` is accepted for interface uniformity but
    unused: the splitter is deterministic (no feature subsampling).

    Recursion depth is bounded by the feature count, since a binary feature
    can split at most once along any path.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise ForestError("X and y disagree on instance count")
    if y.size < 1:
        raise ForestError("need at least one instance")
    return _grow(X, y)


def _grow(X: np.ndarray, y: np.ndarray) -> TreeNode:
    n = y.size
    if n < 2 or (y == y[0]).all():
        return TreeNode(value=float(y.mean()))
    n1 = X.sum(axis=0)
    n0 = n - n1
    valid = (n1 > 0) & (n0 > 0)
    if not valid.any():
        return TreeNode(value=float(y.mean()))
    s_total = y.sum()
    s1 = X.T @ y
    with np.errstate(divide="ignore", invalid="ignore"):
        mean1 = s1 / n1
        mean0 = (s_total - s1) / n0
        gain = (n0 * n1 / n) * (mean0 - mean1) ** 2
    gain[~valid] = -1.0
    best = int(np.argmax(gain))
    if gain[best] <= 0.0:
        return TreeNode(value=float(y.mean()))
    go_right = X[:, best] > 0.5
    return TreeNode(
        feature=best,
        left=_grow(X[~go_right], y[~go_right]),
        right=_grow(X[go_right], y[go_right]),
    )


def predict_tree(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf:
        node = node.right if x[node.feature] > node.threshold else node.left
    return node.value


def _predict_tree_batch(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        mask = X[idx, nd.feature] > nd.threshold
        stack.append((nd.left, idx[~mask]))
        stack.append((nd.right, idx[mask]))
    return out


@dataclass
class Forest:
    """A fixed-size collection of bootstrap-fitted trees."""

    trees: list[TreeNode]
    bootstrap_seeds: tuple[int, ...]
    d: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def fit_forest(X: np.ndarray, y: np.ndarray, n_trees: int = 100, seed: int = 0) -> Forest:
    """Fit ``n_trees`` trees, each on a seeded bootstrap resample of size n."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size < 1:
        raise ForestError("need at least one instance")
    if n_trees < 1:
        raise ForestError("need at least one tree")
    n = y.size
    trees, seeds = [], []
    for t in range(n_trees):
        tree_seed = mix_seed(seed, t)
        idx = np.random.default_rng(tree_seed).integers(0, n, n)
        trees.append(fit_tree(X[idx], y[idx], rng_seed=tree_seed))
        seeds.append(tree_seed)
    return Forest(trees=trees, bootstrap_seeds=tuple(seeds), d=int(X.shape[1]))


def predict_forest(forest: Forest, x: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Route one instance down every tree: (mean, population std, per-tree)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != forest.d:
        raise ForestError(f"input width {x.size} != forest width {forest.d}")
    per_tree = np.array([predict_tree(t, x) for t in forest.trees])
    return float(per_tree.mean()), float(per_tree.std()), per_tree


def predict_forest_matrix(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Per-tree predictions for a matrix of instances: shape (n_trees, n)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != forest.d:
        raise ForestError(f"input width {X.shape[1]} != forest width {forest.d}")
    return np.stack([_predict_tree_batch(t, X) for t in forest.trees])


def kfold_partition(
    train_idx: Sequence[int] | np.ndarray, k: int = 10, seed: int = 0
) -> list[np.ndarray]:
    """Seeded shuffle then contiguous chunking into k folds (sizes differ <= 1)."""
    idx = np.asarray(train_idx, dtype=np.intp)
    if idx.size < k:
        raise ForestError(f"need at least k={k} instances, got {idx.size}")
    if k < 2:
        raise ForestError("k must be >= 2")
    perm = np.random.default_rng(seed).permutation(idx)
    return list(np.array_split(perm, k))


def _node_to_obj(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj: dict) -> TreeNode:
    if "value" in obj:
        return TreeNode(value=float(obj["value"]))
    return TreeNode(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=_node_from_obj(obj["left"]),
        right=_node_from_obj(obj["right"]),
    )


def forest_to_json(forest: Forest) -> str:
    return json.dumps(
        {
            "d": forest.d,
            "bootstrap_seeds": list(forest.bootstrap_seeds),
            "trees": [_node_to_obj(t) for t in forest.trees],
        }
    )


def forest_from_json(text: str) -> Forest:
    obj = json.loads(text)
    return Forest(
        trees=[_node_from_obj(t) for t in obj["trees"]],
        bootstrap_seeds=tuple(int(s) for s in obj["bootstrap_seeds"]),
        d=int(obj["d"]),
    )
