"""CART decision trees and a bootstrap-aggregated random forest.

Trees split on Gini impurity with exhaustive threshold search (midpoints
between consecutive distinct sorted feature values) and grow until pure
or unsplittable (leaf size 1 allowed). Determinism: ties in split quality
resolve to the lowest feature index, then the lowest threshold; per-tree
bootstrap RNGs are spawned from one seed; majority-vote ties resolve to
the lower class index.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyTrainingSetError


@dataclass
class TreeNode:
    counts: np.ndarray                   # class histogram of training rows here
    feature: int | None = None           # None for a leaf
    threshold: float = 0.0               # go left when x[feature] <= threshold
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def gini_impurity(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def best_split(x: np.ndarray, y: np.ndarray, n_classes: int,
               feature_indices=None):
    """Exhaustive Gini split search.

    Returns (feature, threshold, weighted_impurity) or None when every
    candidate feature is constant. Candidate thresholds are midpoints
    between consecutive distinct sorted values, so a chosen threshold
    never equals a data value exactly (up to float midpoint collisions).
    """
    n, n_features = x.shape
    if feature_indices is None:
        feature_indices = range(n_features)
    eye = np.eye(n_classes, dtype=np.float64)
    best = None
    for f in feature_indices:
        order = np.argsort(x[:, f], kind="mergesort")
        xs = x[order, f]
        cum = np.cumsum(eye[y[order]], axis=0)  # (n, K) left-side class counts
        bounds = np.flatnonzero(np.diff(xs) > 0)
        if bounds.size == 0:
            continue
        n_left = (bounds + 1).astype(np.float64)
        n_right = n - n_left
        c_left = cum[bounds]
        c_right = cum[-1] - c_left
        gini_left = 1.0 - np.sum((c_left / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((c_right / n_right[:, None]) ** 2, axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        k = int(np.argmin(weighted))  # first minimum = lowest threshold
        if best is None or weighted[k] < best[2]:
            thr = float((xs[bounds[k]] + xs[bounds[k] + 1]) / 2.0)
            best = (int(f), thr, float(weighted[k]))
    return best


def _grow(x: np.ndarray, y: np.ndarray, n_classes: int,
          max_features: int | None, rng: np.random.Generator | None) -> TreeNode:
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    node = TreeNode(counts=counts)
    if np.count_nonzero(counts) <= 1:
        return node
    feats = None
    if max_features is not None and max_features < x.shape[1]:
        feats = np.sort(rng.choice(x.shape[1], size=max_features, replace=False))
    split = best_split(x, y, n_classes, feats)
    if split is None:
        return node
    node.feature, node.threshold, _ = split
    mask = x[:, node.feature] <= node.threshold
    node.left = _grow(x[mask], y[mask], n_classes, max_features, rng)
    node.right = _grow(x[~mask], y[~mask], n_classes, max_features, rng)
    return node


def tree_predict(root: TreeNode, x: np.ndarray) -> np.ndarray:
    """Route every row of x to its leaf; ties in leaf counts -> lower class."""
    out = np.empty(x.shape[0], dtype=np.intp)
    stack = [(root, np.arange(x.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = int(np.argmax(node.counts))
        else:
            mask = x[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
    return out


@dataclass
class ForestModel:
    trees: list
    n_classes: int
    n_estimators: int
    seed: int
    bootstrap: bool
    max_features: int | None
    bootstrap_indices: list = field(default_factory=list)
    kind: str = "random_forest"


def fit_forest(x: np.ndarray, y: np.ndarray, n_estimators: int = 100,
               seed: int = 42, bootstrap: bool = True,
               max_features: int | None = None,
               n_classes: int | None = None) -> ForestModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if x.shape[0] < 2:
        raise EmptyTrainingSetError(
            f"forest needs at least 2 examples, got {x.shape[0]}")
    if x.shape[0] != y.shape[0]:
        raise EmptyTrainingSetError(
            f"got {x.shape[0]} rows but {y.shape[0]} labels")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    model = ForestModel(trees=[], n_classes=n_classes,
                        n_estimators=n_estimators, seed=seed,
                        bootstrap=bootstrap, max_features=max_features)
    n = x.shape[0]
    for child in np.random.SeedSequence(seed).spawn(n_estimators):
        rng = np.random.default_rng(child)
        if bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        model.bootstrap_indices.append(idx)
        model.trees.append(_grow(x[idx], y[idx], n_classes, max_features, rng))
    return model


def predict_forest(model: ForestModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    votes = np.zeros((x.shape[0], model.n_classes), dtype=np.int64)
    for tree in model.trees:
        pred = tree_predict(tree, x)
        votes[np.arange(x.shape[0]), pred] += 1
    return np.argmax(votes, axis=1)  # vote ties -> lower class index
