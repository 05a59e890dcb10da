"""CART trees: exhaustive midpoint splits, compiled with numba.

Classification trees split on gini or entropy; regression trees (used by the
boosting model) split on squared error and store Newton leaf values. Split
rules shared by both: thresholds are midpoints of adjacent distinct values,
``x <= threshold`` goes left, ties prefer the lower feature index and then the
lower threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from ..errors import DataError

_EPS = 1e-12
LEAF = -1
GINI, ENTROPY = 0, 1
_CRITERIA = {"gini": GINI, "entropy": ENTROPY}


class Split(NamedTuple):
    feature: int
    threshold: float
    decrease: float


def impurity(counts, criterion: str) -> float:
    """Gini (dimensionless) or entropy (bits) of a class-count vector."""
    c = np.asarray(counts, dtype=np.float64)
    if np.any(c < 0):
        raise DataError("class counts must be non-negative")
    total = c.sum()
    if total <= 0:
        raise DataError("impurity of an empty node is undefined")
    if criterion not in _CRITERIA:
        raise DataError(f"unknown criterion {criterion!r}")
    p = c / total
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)) + 0.0)


@numba.njit(cache=True)
def _node_impurity(n1, n, crit):
    p1 = n1 / n
    p0 = 1.0 - p1
    if crit == GINI:
        return 1.0 - p0 * p0 - p1 * p1
    h = 0.0
    if p0 > 0.0:
        h -= p0 * np.log2(p0)
    if p1 > 0.0:
        h -= p1 * np.log2(p1)
    return h


@numba.njit(cache=True)
def _midpoint(lo, hi):
    mid = (lo + hi) / 2.0
    # adjacent floats can round the midpoint up onto hi, which would send hi left
    if mid >= hi:
        return lo
    return mid


@numba.njit(cache=True)
def _scan_class(X, y, S, start, end, feats, crit):
    """Best (feature, threshold, gain) over ``feats`` for one node.

    ``S[f, start:end]`` lists the node's rows sorted by feature ``f``. Returns
    feature -1 when no cut exists. Zero-gain cuts are returned too; callers
    decide whether they are acceptable.
    """
    n = end - start
    total1 = 0
    for i in range(start, end):
        total1 += y[S[0, i]]
    parent = _node_impurity(float(total1), float(n), crit)
    best_f = -1
    best_thr = 0.0
    best_gain = -np.inf
    for fi in range(feats.shape[0]):
        f = feats[fi]
        f_gain = -np.inf
        f_thr = 0.0
        left1 = 0
        for i in range(start, end - 1):
            left1 += y[S[f, i]]
            lo = X[S[f, i], f]
            hi = X[S[f, i + 1], f]
            if not hi > lo:
                continue
            nl = float(i + 1 - start)
            nr = float(n) - nl
            right1 = total1 - left1
            weighted = (nl * _node_impurity(float(left1), nl, crit)
                        + nr * _node_impurity(float(right1), nr, crit)) / n
            gain = parent - weighted
            if gain > f_gain + _EPS:
                f_gain = gain
                f_thr = _midpoint(lo, hi)
        if f_gain > -np.inf and (best_f < 0 or f_gain > best_gain + _EPS):
            best_f = f
            best_thr = f_thr
            best_gain = f_gain
    return best_f, best_thr, best_gain


@numba.njit(cache=True)
def _scan_regression(X, g, S, start, end, feats):
    n = end - start
    total = 0.0
    for i in range(start, end):
        total += g[S[0, i]]
    parent = total * total / n
    best_f = -1
    best_thr = 0.0
    best_gain = -np.inf
    for fi in range(feats.shape[0]):
        f = feats[fi]
        f_gain = -np.inf
        f_thr = 0.0
        sl = 0.0
        for i in range(start, end - 1):
            sl += g[S[f, i]]
            lo = X[S[f, i], f]
            hi = X[S[f, i + 1], f]
            if not hi > lo:
                continue
            nl = float(i + 1 - start)
            sr = total - sl
            gain = sl * sl / nl + sr * sr / (n - nl) - parent
            if f_gain == -np.inf or gain > f_gain + _EPS * max(1.0, abs(f_gain)):
                f_gain = gain
                f_thr = _midpoint(lo, hi)
        if f_gain > -np.inf and (
            best_f < 0 or f_gain > best_gain + _EPS * max(1.0, abs(best_gain))
        ):
            best_f = f
            best_thr = f_thr
            best_gain = f_gain
    return best_f, best_thr, best_gain


@numba.njit(cache=True)
def _partition(S, start, end, goes_left, buf):
    """Stable partition of every feature's segment; returns the split point."""
    mid = start
    for f in range(S.shape[0]):
        j = start
        k = 0
        for i in range(start, end):
            r = S[f, i]
            if goes_left[r]:
                S[f, j] = r
                j += 1
            else:
                buf[k] = r
                k += 1
        for i in range(k):
            S[f, j + i] = buf[i]
        mid = j
    return mid


@numba.njit(cache=True)
def _node_features(keys, node, n_sub, d):
    if n_sub >= d:
        return np.arange(d)
    return np.sort(np.argsort(keys[node])[:n_sub])


@numba.njit(cache=True)
def _grow_nb(X, target, hess, regression, crit, max_depth, min_split, n_sub, keys, S):
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, 2))
    buf = np.empty(n, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    n_nodes = 1
    top = 0
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    while top >= 0:
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        top -= 1
        size = end - start
        # value[:, 0], value[:, 1]: class counts, or (sum grad, sum hess)
        a = 0.0
        b = 0.0
        for i in range(start, end):
            r = S[0, i]
            if regression:
                a += target[r]
                b += hess[r]
            else:
                b += target[r]
        if not regression:
            a = size - b
        value[node, 0] = a
        value[node, 1] = b
        if size < min_split or (max_depth >= 0 and depth >= max_depth):
            continue
        if regression:
            ss = 0.0
            for i in range(start, end):
                ss += target[S[0, i]] * target[S[0, i]]
            if ss - a * a / size <= _EPS * max(1.0, ss):
                continue
        elif a == 0.0 or b == 0.0:
            continue
        feats = _node_features(keys, node, n_sub, d)
        if regression:
            f, thr, gain = _scan_regression(X, target, S, start, end, feats)
        else:
            f, thr, gain = _scan_class(X, target, S, start, end, feats, crit)
        if f < 0:
            continue
        for i in range(start, end):
            r = S[0, i]
            goes_left[r] = X[r, f] <= thr
        mid = _partition(S, start, end, goes_left, buf)
        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        # right pushed first so the left subtree is expanded (and numbered) first
        top += 1
        st_node[top], st_start[top], st_end[top], st_depth[top] = right[node], mid, end, depth + 1
        top += 1
        st_node[top], st_start[top], st_end[top], st_depth[top] = left[node], start, mid, depth + 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes])


def presort(X: np.ndarray) -> np.ndarray:
    """(d, n) row indices sorted by each feature."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str = "gini",
    allow_zero_gain: bool = False,
) -> Split | None:
    """Exhaustive search for the impurity-maximizing axis-aligned split.

    Returns None when no split strictly reduces impurity (or, with
    ``allow_zero_gain``, when no cut exists at all).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if criterion not in _CRITERIA:
        raise DataError(f"unknown criterion {criterion!r}")
    if X.shape[0] < 2:
        return None
    f, thr, gain = _scan_class(X, y, presort(X), 0, X.shape[0], np.arange(X.shape[1]),
                               _CRITERIA[criterion])
    if f < 0 or (gain <= _EPS and not allow_zero_gain):
        return None
    return Split(int(f), float(thr), float(gain))


@dataclass(frozen=True)
class Tree:
    """Flat array tree. ``feature == -1`` marks a leaf.

    ``value`` holds class counts (n_nodes, 2) for classification trees and a
    scalar per node (n_nodes,) for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.arange(X.shape[0])
        while active.size:
            f = self.feature[node[active]]
            inner = f != LEAF
            active = active[inner]
            if not active.size:
                break
            cur = node[active]
            go_left = X[active, f[inner]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict_class(self, X: np.ndarray) -> np.ndarray:
        counts = self.value[self.apply(X)]
        # leaf majority; an even split goes to attack
        return (counts[:, 1] >= counts[:, 0]).astype(np.int64)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


_NO_KEYS = np.zeros((1, 1))


def grow_classifier(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str,
    max_depth: int | None = None,
    min_samples_split: int = 2,
    features_per_split: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Classification tree grown until leaves are pure or unsplittable.

    An impure node with no impurity-reducing cut still takes the best
    zero-gain cut (XOR-like layouts), so consistent data is always memorized.
    With ``features_per_split`` each node scans a random feature subset drawn
    from ``rng``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n, d = X.shape
    n_sub = d if features_per_split is None else min(features_per_split, d)
    keys = rng.random((2 * n + 1, d)) if n_sub < d else _NO_KEYS
    f, t, lft, rgt, v = _grow_nb(X, y, _NO_KEYS[0], False, _CRITERIA[criterion],
                                 -1 if max_depth is None else max_depth,
                                 min_samples_split, n_sub, keys, presort(X))
    return Tree(f, t, lft, rgt, v)


def grow_regressor(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    max_depth: int,
    sorted_idx: np.ndarray | None = None,
) -> Tree:
    """Squared-error tree on ``grad``; each node stores the Newton step sum(g)/sum(h).

    ``sorted_idx`` (from :func:`presort`) may be shared across boosting rounds.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    S = presort(X) if sorted_idx is None else sorted_idx.copy()
    f, t, lft, rgt, v = _grow_nb(X, np.ascontiguousarray(grad, dtype=np.float64),
                                 np.ascontiguousarray(hess, dtype=np.float64), True, GINI,
                                 max_depth, 2, X.shape[1], _NO_KEYS, S)
    return Tree(f, t, lft, rgt, v[:, 0] / np.maximum(v[:, 1], 1e-12))
