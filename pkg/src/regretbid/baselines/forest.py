"""Bootstrap forest of shallow regression trees, grown for all trees at once.

Bootstrap resamples are represented as multiplicity weights over the
training rows, so every tree shares one sort of each feature and a whole
level of a tree is scored in a single pass over each sorted column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooFewRows
from ._kernels import grow_forest


@dataclass(frozen=True)
class ForestModel:
    features: np.ndarray  # (trees, internal nodes) split feature, -1 for none
    thresholds: np.ndarray  # (trees, internal nodes)
    leaves: np.ndarray  # (trees, 2**depth)
    max_depth: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.leaves)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = self.n_trees
        node = np.zeros((T, len(X)), dtype=np.int64)
        rows = np.arange(len(X))[None, :]
        trees = np.arange(T)[:, None]
        for _ in range(self.max_depth):
            f = self.features[trees, node]
            thr = self.thresholds[trees, node]
            go_right = (f >= 0) & (X[rows, np.maximum(f, 0)] > thr)
            node = 2 * node + 1 + go_right
        leaf = node - (2**self.max_depth - 1)
        return self.leaves[trees, leaf].mean(axis=0)


def fit_rf2(X, y, seed: int = 0, n_trees: int = 100, max_depth: int = 2) -> ForestModel:
    """Bagged variance-reduction trees; one bootstrap resample per tree from ``seed``."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if n < 5:
        raise TooFewRows(f"forest needs at least 5 rows, got {n}")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, n, size=(n_trees, n))
    offsets = (np.arange(n_trees) * n)[:, None]
    counts = np.bincount((draws + offsets).ravel(), minlength=n_trees * n).reshape(n_trees, n).astype(float)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    n_internal = 2**max_depth - 1
    features = np.full((n_trees, n_internal), -1, dtype=np.int64)
    thresholds = np.full((n_trees, n_internal), np.inf)
    values = np.zeros((n_trees, 2 ** (max_depth + 1) - 1))
    grow_forest(X, y, order, counts, max_depth, features, thresholds, values)
    return ForestModel(features, thresholds, np.ascontiguousarray(values[:, n_internal:]), max_depth, seed)
