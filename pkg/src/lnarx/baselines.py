"""Reference classifiers: k-nearest neighbours and a CART random forest.

Labels are dense class indices ``1..C`` as elsewhere in the package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import FoldPlan, TimeSeriesDataset
from .errors import ConfigError
from .metrics import cross_validate


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ConfigError("X must be 2-D with one row per label")
    if len(y) == 0:
        raise ConfigError("empty training set")
    if y.min() < 1:
        raise ConfigError("labels must be 1-based class indices")
    return X, y


def _vote(counts: np.ndarray) -> np.ndarray:
    """Row-wise argmax over class counts, lowest class on ties (1-based)."""
    return np.argmax(counts, axis=1) + 1


# --------------------------------------------------------------------------
# KNN
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    n_classes: int


def knn_fit(X, y, k: int = 5, n_classes: int | None = None) -> KnnModel:
    X, y = _check_xy(X, y)
    if not 1 <= k <= len(y):
        raise ConfigError(f"k must lie in 1..{len(y)}")
    return KnnModel(X, y, k, int(n_classes or y.max()))


def knn_predict(model: KnnModel, X, chunk: int = 512) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows (Euclidean).

    Equal distances resolve to the lower training index; equal votes to the
    lowest class.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.X.shape[1]:
        raise ConfigError("feature count differs from the training data")
    sq_train = np.einsum("ij,ij->i", model.X, model.X)
    out = np.empty(len(X), dtype=int)
    for s in range(0, len(X), chunk):
        Q = X[s: s + chunk]
        d2 = np.einsum("ij,ij->i", Q, Q)[:, None] - 2 * Q @ model.X.T + sq_train[None, :]
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
        labels = model.y[nearest]
        counts = np.zeros((len(Q), model.n_classes), dtype=int)
        for c in range(model.n_classes):
            counts[:, c] = np.sum(labels == c + 1, axis=1)
        out[s: s + chunk] = _vote(counts)
    return out


# --------------------------------------------------------------------------
# CART
# --------------------------------------------------------------------------


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    return 0.0 if n == 0 else float(1.0 - np.sum((counts / n) ** 2))


def split_impurity(y_left, y_right, n_classes: int) -> float:
    """Sample-weighted Gini impurity of a two-way split."""
    cl = np.bincount(np.asarray(y_left) - 1, minlength=n_classes)
    cr = np.bincount(np.asarray(y_right) - 1, minlength=n_classes)
    n = cl.sum() + cr.sum()
    return (cl.sum() * gini(cl) + cr.sum() * gini(cr)) / n


@dataclass
class Tree:
    """Flat binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class distribution per node, rows sum to 1

    def apply(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def predict(self, X) -> np.ndarray:
        return _vote(self.predict_proba(X))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


def _best_split(X, Y1h, idx, features, min_leaf):
    """Best (score, feature, threshold) over ``features``; larger score is purer."""
    n = len(idx)
    best = (-np.inf, -1, 0.0)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        left = np.cumsum(Y1h[idx[order]], axis=0)[:-1]
        total = left[-1] + Y1h[idx[order[-1]]]
        right = total - left
        nl = np.arange(1, n)
        nr = n - nl
        ok = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        score = (left ** 2).sum(axis=1) / nl + (right ** 2).sum(axis=1) / nr
        score = np.where(ok, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best[0]:
            best = (float(score[i]), int(f), float((xs[i] + xs[i + 1]) / 2))
    return best


def fit_tree(X, y, n_classes: int, max_depth: int | None = None, min_leaf: int = 1,
             max_features: int | None = None, rng=None) -> Tree:
    """Grow a CART tree minimising weighted Gini impurity."""
    X, y = _check_xy(X, y)
    rng = rng if rng is not None else np.random.default_rng(0)
    d = X.shape[1]
    m = d if max_features is None else max(1, min(d, int(max_features)))
    Y1h = np.eye(n_classes)[y - 1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        counts = Y1h[idx].sum(axis=0)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = Y1h[idx].sum(axis=0)
        if (max_depth is not None and depth >= max_depth) or len(idx) < 2 * min_leaf or counts.max() == len(idx):
            continue
        features = rng.choice(d, size=m, replace=False) if m < d else np.arange(d)
        score, f, thr = _best_split(X, Y1h, idx, features, min_leaf)
        # zero-gain splits are kept (XOR-like data has no first-split gain)
        if f < 0:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value))


# --------------------------------------------------------------------------
# Random forest
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: int | str | None = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ConfigError("n_trees and min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")

    def features_per_split(self, d: int) -> int:
        if self.max_features == "sqrt":
            return math.ceil(math.sqrt(d))
        if self.max_features is None:
            return d
        return int(self.max_features)

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth, "min_leaf": self.min_leaf,
                "max_features": self.max_features, "bootstrap": self.bootstrap}


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    params: ForestParams
    n_classes: int
    seed: int


def forest_fit(X, y, params: ForestParams = ForestParams(), seed: int = 0,
               n_classes: int | None = None) -> ForestModel:
    """Bagged CART trees with a random feature subset at every split."""
    X, y = _check_xy(X, y)
    C = int(n_classes or y.max())
    rng = np.random.default_rng(seed)
    m = params.features_per_split(X.shape[1])
    trees = []
    for _ in range(params.n_trees):
        rows = rng.integers(0, len(y), len(y)) if params.bootstrap else np.arange(len(y))
        trees.append(fit_tree(X[rows], y[rows], C, params.max_depth, params.min_leaf, m, rng))
    return ForestModel(tuple(trees), params, C, seed)


def forest_predict(model: ForestModel, X) -> np.ndarray:
    """Majority vote of the trees' hard predictions, lowest class on ties."""
    X = np.asarray(X, dtype=float)
    counts = np.zeros((len(X), model.n_classes), dtype=int)
    rows = np.arange(len(X))
    for tree in model.trees:
        np.add.at(counts, (rows, tree.predict(X) - 1), 1)
    return _vote(counts)


@dataclass(frozen=True)
class ParamGrid:
    """Candidate values per forest hyperparameter, searched exhaustively."""

    n_trees: tuple = (100,)
    max_depth: tuple = (None,)
    min_leaf: tuple = (1,)
    max_features: tuple = ("sqrt",)

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "min_leaf", "max_features"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ConfigError(f"empty grid for {name}")
            object.__setattr__(self, name, vals)

    def __iter__(self):
        for nt, md, ml, mf in itertools.product(self.n_trees, self.max_depth, self.min_leaf, self.max_features):
            yield ForestParams(nt, md, ml, mf)

    def __len__(self):
        return len(self.n_trees) * len(self.max_depth) * len(self.min_leaf) * len(self.max_features)

    @classmethod
    def from_dict(cls, d: dict) -> "ParamGrid":
        return cls(**{k: tuple(v) for k, v in d.items()})


@dataclass(frozen=True)
class GridSearchResult:
    best_params: ForestParams
    model: ForestModel
    cv_score: float
    scores: tuple = field(default=(), repr=False)


def grid_search(grid: ParamGrid, ds: TimeSeriesDataset, folds: FoldPlan, seed: int = 0,
                metric: str = "accuracy") -> GridSearchResult:
    """Pick the grid point with the best mean CV ``metric`` (first wins ties)
    and refit it on all of ``ds``."""
    C = ds.class_count
    scores = []
    best, best_score = None, -np.inf
    for params in grid:
        def trainer(train, params=params):
            model = forest_fit(train.channels, train.labels, params, seed, C)
            return lambda test: forest_predict(model, test.channels)

        score = cross_validate(trainer, ds, folds).mean[metric]
        scores.append((params, score))
        if score > best_score:
            best, best_score = params, score
    model = forest_fit(ds.channels, ds.labels, best, seed, C)
    return GridSearchResult(best, model, float(best_score), tuple(scores))
