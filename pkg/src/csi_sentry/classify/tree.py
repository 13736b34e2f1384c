"""CART decision tree over feature vectors, split on Gini impurity.

Candidate thresholds are midpoints between consecutive distinct sorted
feature values, and split quality depends only on class counts either
side of the cut — so any strictly increasing transform of a feature
leaves the learned structure unchanged.  All tie-breaks are
deterministic: first (lowest-index) feature, then lowest threshold,
then lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..exceptions import DimMismatch, EmptyDataset
from ..validation import as_float_matrix, check_fitted


@dataclass
class _Node:
    class_index: int
    n_samples: int
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini(counts: np.ndarray, n: int) -> float:
    return 1.0 - float(((counts / n) ** 2).sum())


def _best_split(
    X: np.ndarray, y: np.ndarray, n_classes: int
) -> tuple[int, float, float] | None:
    """(feature, midpoint threshold, weighted child impurity), or None."""
    n = len(y)
    total = np.bincount(y, minlength=n_classes)
    best: tuple[int, float, float] | None = None
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y[order]] = 1.0
        cum = onehot.cumsum(axis=0)
        cuts = np.flatnonzero(xs[:-1] < xs[1:])  # split between i and i+1
        if cuts.size == 0:
            continue
        nl = (cuts + 1).astype(float)
        nr = n - nl
        left = cum[cuts]
        right = total - left
        gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gl + nr * gr) / n
        b = int(np.argmin(weighted))  # first minimum -> lowest threshold
        if best is None or weighted[b] < best[2]:
            threshold = (xs[cuts[b]] + xs[cuts[b] + 1]) / 2.0
            best = (f, float(threshold), float(weighted[b]))
    return best


class DecisionTreeActivityClassifier(BaseEstimator, ClassifierMixin):
    """Plain CART classifier; ``explain`` walks one sample's decision path."""

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split

    def fit(self, X, y) -> "DecisionTreeActivityClassifier":
        X = as_float_matrix(X, "X")
        y = np.asarray(y)
        if len(X) == 0:
            raise EmptyDataset("cannot fit a tree on zero samples")
        if len(X) != len(y):
            raise DimMismatch(f"{len(X)} samples but {len(y)} labels")
        self.classes_ = np.unique(y)
        y_idx = np.searchsorted(self.classes_, y)
        self.n_features_in_ = X.shape[1]
        self.root_ = self._grow(X, y_idx, depth=0)
        self.depth_ = self._depth(self.root_)
        self.n_leaves_ = self._leaves(self.root_)
        return self

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> _Node:
        counts = np.bincount(y, minlength=len(self.classes_))
        node = _Node(class_index=int(np.argmax(counts)), n_samples=len(y))
        if (
            counts.max() == len(y)  # pure
            or len(y) < self.min_samples_split
            or (self.max_depth is not None and depth >= self.max_depth)
        ):
            return node
        split = _best_split(X, y, len(self.classes_))
        if split is None:
            return node
        f, threshold, weighted = split
        if _gini(counts, len(y)) - weighted <= 0.0:
            return node
        mask = X[:, f] <= threshold
        node.feature = f
        node.threshold = threshold
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def _depth(self, node: _Node) -> int:
        if node.is_leaf:
            return 0
        return 1 + max(self._depth(node.left), self._depth(node.right))

    def _leaves(self, node: _Node) -> int:
        if node.is_leaf:
            return 1
        return self._leaves(node.left) + self._leaves(node.right)

    def _check_input(self, X) -> np.ndarray:
        check_fitted(self, "root_")
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise DimMismatch(
                f"model expects {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check_input(X)
        out = []
        for row in X:
            node = self.root_
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out.append(self.classes_[node.class_index])
        return np.array(out)

    def explain(self, x) -> tuple[list[tuple[int, float, str]], object]:
        """Decision path for one sample: (feature, threshold, '<=' or '>')
        per internal node, plus the predicted label."""
        X = self._check_input(np.asarray(x, dtype=np.float64).reshape(1, -1))
        row = X[0]
        steps: list[tuple[int, float, str]] = []
        node = self.root_
        while not node.is_leaf:
            went_left = row[node.feature] <= node.threshold
            steps.append((node.feature, node.threshold, "<=" if went_left else ">"))
            node = node.left if went_left else node.right
        return steps, self.classes_[node.class_index]
