"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def brute_kneighbors(queries, reference, k, exclude=None):
    """Indices of the k nearest reference rows per query; ties -> lower index."""
    out = []
    for qi, q in enumerate(np.asarray(queries, dtype=float)):
        cand = []
        for ri, r in enumerate(np.asarray(reference, dtype=float)):
            if exclude is not None and ri == exclude[qi]:
                continue
            cand.append((float(np.sum((q - r) ** 2)), ri))
        cand.sort()
        out.append([ri for _, ri in cand[:k]])
    return np.array(out, dtype=np.int64)


def knn_predict(train_z, train_y, query_z, k):
    nbrs = brute_kneighbors(query_z, train_z, k)
    out = []
    for row in nbrs:
        votes = int(sum(train_y[i] for i in row))
        if 2 * votes > k:
            out.append(1)
        elif 2 * votes < k:
            out.append(0)
        else:
            out.append(int(train_y[row[0]]))
    return np.array(out)


def gini(n0, n1):
    n = n0 + n1
    return 1.0 - (n0 / n) ** 2 - (n1 / n) ** 2


def entropy(n0, n1):
    n = n0 + n1
    return -sum(c / n * math.log2(c / n) for c in (n0, n1) if c)


def exhaustive_split(X, y, criterion="gini"):
    """O(n^2 d): try every midpoint of every feature, recount each side from scratch.

    Returns (feature, threshold, decrease) of the best strictly positive split
    (ties -> lower feature, then lower threshold), or None.
    """
    imp = gini if criterion == "gini" else entropy
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)
    parent = imp(int(np.sum(y == 0)), int(np.sum(y == 1)))
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2.0
            left = [y[i] for i in range(n) if X[i, f] <= thr]
            right = [y[i] for i in range(n) if X[i, f] > thr]
            w = (len(left) * imp(left.count(0), left.count(1))
                 + len(right) * imp(right.count(0), right.count(1))) / n
            dec = parent - w
            if dec <= 1e-12:
                continue
            if best is None or dec > best[2] + 1e-12:
                best = (f, thr, dec)
    return best


def gnb_log_posterior(X, y, var_smoothing, query):
    """Closed-form Gaussian NB log posteriors via scipy.stats, columns [0, 1]."""
    from scipy.stats import norm
    from scipy.special import logsumexp

    X = np.asarray(X, dtype=float)
    eps = var_smoothing * X.var(axis=0).max()
    jll = np.zeros((len(query), 2))
    for c in (0, 1):
        Xc = X[y == c]
        prior = len(Xc) / len(X)
        mu = Xc.mean(axis=0)
        sd = np.sqrt(Xc.var(axis=0) + eps)
        jll[:, c] = math.log(prior) + norm.logpdf(query, mu, sd).sum(axis=1)
    return jll - logsumexp(jll, axis=1, keepdims=True)


def two_partition_kmeans(points):
    """Optimal 2-means of 1-d points by enumerating every bipartition."""
    pts = list(points)
    best = None
    for mask in itertools.product((0, 1), repeat=len(pts)):
        if len(set(mask)) < 2:
            continue
        groups = [[p for p, m in zip(pts, mask) if m == g] for g in (0, 1)]
        cents = [sum(g) / len(g) for g in groups]
        w = sum((p - cents[g]) ** 2 for g in (0, 1) for p in groups[g])
        if best is None or w < best[0]:
            best = (w, sorted(cents))
    return best


def tally(y_true, y_pred):
    counts = [[0, 0], [0, 0]]
    for t, p in zip(y_true, y_pred):
        counts[int(t)][int(p)] += 1
    return counts


def on_segment(s, a, b, tol):
    """True when s = a + lam (b - a) for some lam in [0, 1], within tol."""
    s, a, b = (np.asarray(v, dtype=float) for v in (s, a, b))
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return bool(np.max(np.abs(s - a)) <= tol)
    lam = float((s - a) @ d) / dd
    if lam < -tol or lam > 1 + tol:
        return False
    lam = min(max(lam, 0.0), 1.0)
    return bool(np.max(np.abs(a + lam * d - s)) <= tol)


def chord_elbow(curve):
    """Largest perpendicular distance to the end-to-end chord; ties -> smaller k."""
    (k0, w0), (k1, w1) = curve[0], curve[-1]
    best_k, best_d = None, -1.0
    for k, w in curve[1:-1]:
        num = abs((w1 - w0) * k - (k1 - k0) * w + k1 * w0 - w1 * k0)
        dist = num / math.hypot(w1 - w0, k1 - k0)
        if dist > best_d + 1e-12:
            best_k, best_d = k, dist
    return best_k
