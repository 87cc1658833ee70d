"""Random-forest regression (bagged CART) and interlayer spillover importances.

Trees are grown by a numba kernel. All randomness for a tree (bootstrap
rows and the per-node feature-subset keys) is drawn up front from a numpy
Generator, so a forest is a pure function of (data, config, seed) and the
trees could be grown in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import DataError

RELATIONS = (
    ("Price", "Return"),
    ("TradingValue", "Price"),
    ("TradingValue", "Return"),
)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int = 10
    min_samples_leaf: int = 5
    mtry: int | None = None  # None -> ceil(n_features / 3)
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError(f"mtry must be >= 1, got {self.mtry}")

    def resolve_mtry(self, n_features: int) -> int:
        mtry = math.ceil(n_features / 3) if self.mtry is None else self.mtry
        if not 1 <= mtry <= n_features:
            raise ValueError(f"mtry must lie in [1, {n_features}], got {mtry}")
        return mtry


LEAF = -1
TIE_RTOL = 1e-12


@njit(cache=True)
def _best_split(X, y, order, w, node_of, node, n, mean, feats, min_leaf):
    best_gain = 0.0
    best_f = -1
    best_thr = 0.0
    m = X.shape[0]
    for f in feats:
        cnt = 0
        left = 0.0
        prev = 0.0
        for a in range(m):
            r = order[f, a]
            if node_of[r] != node:
                continue
            v = X[r, f]
            if cnt >= min_leaf and n - cnt >= min_leaf and v != prev:
                # centred targets: the right-hand sum is -left
                gain = left * left / cnt + left * left / (n - cnt)
                # near-equal gains (same partition via another feature) count as ties
                if gain > best_gain * (1.0 + TIE_RTOL):
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (prev + v)
                    if thr >= v:
                        thr = prev
                    best_thr = thr
            cnt += w[r]
            left += w[r] * (y[r] - mean)
            prev = v
    return best_f, best_thr, best_gain


@njit(cache=True)
def _grow(X, y, order, w, keys, max_depth, min_leaf, mtry, feature, threshold, left, right, value, n_samples, gain):
    """Grow one tree into preallocated node arrays; returns the node count.

    ``w`` holds per-row multiplicities (bootstrap counts); ``order[f]`` is
    the ascending row order of feature ``f``.
    """
    max_nodes = feature.shape[0]
    m, k = X.shape
    node_of = np.empty(m, np.int64)
    for r in range(m):
        node_of[r] = 0 if w[r] > 0 else -1
    stack = np.empty(max_nodes, np.int64)
    depth_of = np.zeros(max_nodes, np.int64)
    stack[0] = 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        depth = depth_of[node]
        n = 0
        s = 0.0
        first = True
        constant = True
        y0 = 0.0
        for r in range(m):
            if node_of[r] == node:
                n += w[r]
                s += w[r] * y[r]
                if first:
                    y0 = y[r]
                    first = False
                elif y[r] != y0:
                    constant = False
        mean = s / n
        value[node] = mean
        n_samples[node] = n
        feature[node] = LEAF
        left[node] = LEAF
        right[node] = LEAF
        gain[node] = 0.0
        if depth >= max_depth or n < 2 * min_leaf or constant or n_nodes + 2 > max_nodes:
            continue
        if mtry < k:
            feats = np.sort(np.argsort(keys[node])[:mtry])
        else:
            feats = np.arange(k)
        f, thr, g = _best_split(X, y, order, w, node_of, node, n, mean, feats, min_leaf)
        if f < 0:
            continue
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        for r in range(m):
            if node_of[r] == node:
                node_of[r] = lc if X[r, f] <= thr else rc
        feature[node] = f
        threshold[node] = thr
        gain[node] = g
        left[node] = lc
        right[node] = rc
        depth_of[lc] = depth + 1
        depth_of[rc] = depth + 1
        # push right first so the left subtree is expanded first
        stack[sp] = rc
        stack[sp + 1] = lc
        sp += 2
    return n_nodes


@njit(cache=True)
def _grow_forest(X, y, order, weights, keys, max_depth, min_leaf, mtry, feature, threshold, left, right, value, n_samples, gain):
    n_trees = weights.shape[0]
    counts = np.empty(n_trees, np.int64)
    for t in range(n_trees):
        counts[t] = _grow(
            X, y, order, weights[t], keys[t], max_depth, min_leaf, mtry,
            feature[t], threshold[t], left[t], right[t], value[t], n_samples[t], gain[t],
        )
    return counts


@njit(cache=True)
def _predict_forest(X, feature, threshold, left, right, value):
    n_trees = feature.shape[0]
    m = X.shape[0]
    out = np.zeros(m)
    for t in range(n_trees):
        for r in range(m):
            node = 0
            while feature[t, node] != LEAF:
                if X[r, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[r] += value[t, node]
    return out / n_trees


def _node_capacity(m, min_leaf):
    # every leaf holds >= min_leaf rows, so a tree has at most 2*(m//min_leaf) - 1 nodes
    return max(1, 2 * (m // min_leaf))


def _feature_order(X):
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def _alloc(n_trees, max_nodes):
    return dict(
        feature=np.full((n_trees, max_nodes), LEAF, np.int64),
        threshold=np.zeros((n_trees, max_nodes)),
        left=np.full((n_trees, max_nodes), LEAF, np.int64),
        right=np.full((n_trees, max_nodes), LEAF, np.int64),
        value=np.zeros((n_trees, max_nodes)),
        n_samples=np.zeros((n_trees, max_nodes), np.int64),
        gain=np.zeros((n_trees, max_nodes)),
    )


def _check_xy(features, targets, config):
    X = np.ascontiguousarray(features, dtype=float)
    y = np.ascontiguousarray(targets, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"features {X.shape} and targets {y.shape} are not conformable")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("features and targets must be finite")
    m = X.shape[0]
    if m < 2 * config.min_samples_leaf:
        raise DataError(f"need at least {2 * config.min_samples_leaf} samples, got {m}")
    return X, y


@dataclass
class RegressionTree:
    """Flat array representation of a fitted CART tree.

    ``feature[node] == -1`` marks a leaf; ``gain`` is the weighted impurity
    (sum of squared error) decrease produced by each internal node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return _predict_forest(
            X, self.feature[None], self.threshold[None], self.left[None], self.right[None], self.value[None]
        )

    def raw_importances(self) -> np.ndarray:
        internal = self.feature != LEAF
        return np.bincount(self.feature[internal], weights=self.gain[internal], minlength=self.n_features)


def fit_tree(features, targets, config: ForestConfig = ForestConfig(), rng=None) -> RegressionTree:
    """Grow one CART regression tree on all rows (no bootstrap).

    At every node ``mtry`` candidate features are drawn; the split
    maximising the reduction in squared error wins, ties going to the
    lowest feature index and then the lowest threshold.
    """
    X, y = _check_xy(features, targets, config)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    m, k = X.shape
    mtry = config.resolve_mtry(k)
    max_nodes = _node_capacity(m, config.min_samples_leaf)
    keys = rng.random((1, max_nodes, k))
    weights = np.ones((1, m), dtype=np.int64)
    arrays = _alloc(1, max_nodes)
    counts = _grow_forest(X, y, _feature_order(X), weights, keys, config.max_depth, config.min_samples_leaf, mtry, **arrays)
    n = int(counts[0])
    return RegressionTree(**{name: a[0, :n].copy() for name, a in arrays.items()}, n_features=k)


@dataclass
class Forest:
    config: ForestConfig
    n_features: int
    arrays: dict = field(repr=False)
    node_counts: np.ndarray = field(repr=False)

    @property
    def trees(self) -> list[RegressionTree]:
        return [
            RegressionTree(**{name: a[t, :n].copy() for name, a in self.arrays.items()}, n_features=self.n_features)
            for t, n in enumerate(self.node_counts)
        ]

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected (m, {self.n_features}) features, got {X.shape}")
        a = self.arrays
        return _predict_forest(X, a["feature"], a["threshold"], a["left"], a["right"], a["value"])


def fit_forest(features, targets, config: ForestConfig = ForestConfig()) -> Forest:
    """Bagged ensemble of ``config.n_trees`` trees; prediction is the tree mean.

    The master seed feeds one Generator which draws, in order, every
    tree's bootstrap rows (when enabled) and then every tree's node keys.
    """
    X, y = _check_xy(features, targets, config)
    m, k = X.shape
    mtry = config.resolve_mtry(k)
    max_nodes = _node_capacity(m, config.min_samples_leaf)
    rng = np.random.default_rng(config.seed)
    if config.bootstrap:
        rows = rng.integers(0, m, size=(config.n_trees, m), dtype=np.int64)
        weights = np.stack([np.bincount(r, minlength=m) for r in rows]).astype(np.int64)
    else:
        weights = np.ones((config.n_trees, m), dtype=np.int64)
    keys = rng.random((config.n_trees, max_nodes, k))
    arrays = _alloc(config.n_trees, max_nodes)
    counts = _grow_forest(X, y, _feature_order(X), weights, keys, config.max_depth, config.min_samples_leaf, mtry, **arrays)
    return Forest(config, k, arrays, counts)


def importances(forest: Forest) -> np.ndarray:
    """Mean decrease in impurity, normalised per tree, averaged, summing to 1.

    All zeros when no tree made a split.
    """
    feat = forest.arrays["feature"]
    gain = np.where(feat != LEAF, forest.arrays["gain"], 0.0)
    rows = np.broadcast_to(np.arange(feat.shape[0])[:, None], feat.shape)
    raw = np.zeros((feat.shape[0], forest.n_features))
    np.add.at(raw, (rows[feat != LEAF], feat[feat != LEAF]), gain[feat != LEAF])
    per_tree = raw.sum(axis=1, keepdims=True)
    total = np.divide(raw, per_tree, out=np.zeros_like(raw), where=per_tree > 0).sum(axis=0)
    s = total.sum()
    return total / s if s > 0 else total


@dataclass
class ImportanceMatrix:
    """Row i holds the importance of every source node's lagged value for target node i."""

    entries: np.ndarray
    relation: tuple | None = None
    window: int | None = None


@dataclass
class InterlayerAdjacency:
    entries: np.ndarray
    relation: tuple | None = None
    zeta: float | None = None
    window: int | None = None


def row_seed(seed: int, row: int) -> int:
    return int(np.random.SeedSequence([seed, row]).generate_state(1)[0])


def interlayer_importance(source_layer, target_layer, lag: int = 1, config: ForestConfig = ForestConfig(),
                          relation=None, window=None) -> ImportanceMatrix:
    """One forest per target node predicting target_i[t] from every source_j[t - lag].

    ``source_layer`` and ``target_layer`` are (n, L) arrays of aligned
    observations. A constant target row yields an all-zero importance row.
    """
    S = np.asarray(source_layer, dtype=float)
    Y = np.asarray(target_layer, dtype=float)
    if S.ndim != 2 or S.shape != Y.shape:
        raise ValueError(f"source {S.shape} and target {Y.shape} must be equal (n, L) arrays")
    n, L = S.shape
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    if L <= lag or L - lag < 2 * config.min_samples_leaf:
        raise DataError(f"{L} observations are too few for lag {lag}")
    X = S[:, : L - lag].T
    M = np.zeros((n, n))
    for i in range(n):
        forest = fit_forest(X, Y[i, lag:], replace(config, seed=row_seed(config.seed, i)))
        M[i] = importances(forest)
    return ImportanceMatrix(M, relation, window)


def threshold_importance(imp, zeta: float) -> InterlayerAdjacency:
    """S_ij = 1 iff importance_ij > zeta."""
    if zeta < 0:
        raise ValueError(f"zeta must be >= 0, got {zeta}")
    M = np.asarray(getattr(imp, "entries", imp), dtype=float)
    S = (M > zeta).astype(np.int8)
    return InterlayerAdjacency(S, getattr(imp, "relation", None), zeta, getattr(imp, "window", None))
