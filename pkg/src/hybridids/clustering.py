"""Feature standardization, K-Means (k-means++ seeding) and elbow selection of k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

_TINY = 1e-12


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.shape[0]:
            raise DataError(f"expected {self.mean.shape[0]} features, got {X.shape[-1]}")
        scale = np.where(self.std > _TINY, self.std, 1.0)
        Z = (X - self.mean) / scale
        # constant columns carry no information: pin them to 0
        Z[..., self.std <= _TINY] = 0.0
        return Z

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        scale = np.where(self.std > _TINY, self.std, 1.0)
        return np.asarray(Z) * scale + self.mean

    @classmethod
    def identity(cls, n_features: int) -> Standardizer:
        return cls(np.zeros(n_features), np.ones(n_features))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Standardizer:
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def fit_standardizer(X: np.ndarray) -> Standardizer:
    """Per-column mean and population standard deviation."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot fit a standardizer on an empty matrix")
    return Standardizer(X.mean(axis=0), X.std(axis=0))


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray  # (k, d), standardized space
    standardizer: Standardizer
    wcss: float
    iterations_run: int
    wcss_curve: tuple[tuple[int, float], ...] = ()
    wcss_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def assign_batch(self, X: np.ndarray) -> np.ndarray:
        """Nearest centroid per raw-feature row; ties go to the lowest cluster id."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("expected a 2-d matrix of samples")
        if X.shape[1] != self.centroids.shape[1]:
            raise DataError(
                f"sample has {X.shape[1]} features, centroids have {self.centroids.shape[1]}"
            )
        return _nearest(self.standardizer.transform(X), self.centroids)[0]

    def to_dict(self) -> dict:
        return {
            "centroids": self.centroids.tolist(),
            "standardizer": self.standardizer.to_dict(),
            "wcss": self.wcss,
            "iterations_run": self.iterations_run,
            "wcss_curve": [[k, w] for k, w in self.wcss_curve],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ClusterModel:
        return cls(
            centroids=np.asarray(d["centroids"], dtype=np.float64).reshape(len(d["centroids"]), -1),
            standardizer=Standardizer.from_dict(d["standardizer"]),
            wcss=float(d["wcss"]),
            iterations_run=int(d["iterations_run"]),
            wcss_curve=tuple((int(k), float(w)) for k, w in d["wcss_curve"]),
        )


@numba.njit(cache=True)
def _nearest_nb(Z, centroids):
    n, d = Z.shape
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(k):
            acc = 0.0
            for f in range(d):
                diff = Z[i, f] - centroids[j, f]
                acc += diff * diff
            if acc < best:  # strict: ties keep the lowest cluster id
                best = acc
                arg = j
        labels[i] = arg
        dists[i] = best
    return labels, dists


@numba.njit(cache=True)
def _cluster_sums(Z, labels, k):
    sums = np.zeros((k, Z.shape[1]))
    for i in range(Z.shape[0]):
        sums[labels[i]] += Z[i]
    return sums


def _nearest(Z: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(label, squared distance) of each row's nearest centroid."""
    return _nearest_nb(np.ascontiguousarray(Z, dtype=np.float64),
                       np.ascontiguousarray(centroids, dtype=np.float64))


def assign(model: ClusterModel, sample: np.ndarray) -> int:
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 1:
        raise DataError("assign expects a single feature vector")
    return int(model.assign_batch(sample[None, :])[0])


def _kmeans_pp(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    centers = [Z[rng.integers(n)]]
    closest = np.einsum("ij,ij->i", Z - centers[0], Z - centers[0])
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every row coincides with a chosen center; pick any row not yet used
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(Z[idx])
        diff = Z - Z[idx]
        np.minimum(closest, np.einsum("ij,ij->i", diff, diff), out=closest)
    return np.array(centers)


def _update(Z: np.ndarray, labels: np.ndarray, dists: np.ndarray, centroids: np.ndarray):
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = _cluster_sums(Z, labels, k)
    new = centroids.copy()
    filled = counts > 0
    new[filled] = sums[filled] / counts[filled, None]
    empty = np.flatnonzero(~filled)
    if empty.size:
        # move each empty centroid onto the row farthest from its current centroid
        taken = set()
        order = np.argsort(-dists, kind="stable")
        pos = 0
        for j in empty:
            while int(order[pos]) in taken:
                pos += 1
            row = int(order[pos])
            taken.add(row)
            new[j] = Z[row]
        logger.debug("reseeded %d empty cluster(s)", empty.size)
    return new, empty.size


def _has_distinct(Z: np.ndarray, k: int) -> bool:
    """True when ``Z`` holds at least ``k`` distinct rows (early exit, O(n k d))."""
    remaining = np.ones(Z.shape[0], dtype=bool)
    for _ in range(k):
        idx = np.flatnonzero(remaining)
        if idx.size == 0:
            return False
        remaining &= np.any(Z != Z[idx[0]], axis=1)
    return True


def _lloyd(Z: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float):
    centroids = _kmeans_pp(Z, k, rng)
    labels, dists = _nearest(Z, centroids)
    history = [float(dists.sum())]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new, n_empty = _update(Z, labels, dists, centroids)
        shift = float(np.max(np.sqrt(np.sum((new - centroids) ** 2, axis=1))))
        centroids = new
        new_labels, dists = _nearest(Z, centroids)
        history.append(float(dists.sum()))
        stable = np.array_equal(new_labels, labels) and n_empty == 0
        labels = new_labels
        if stable or shift < tol:
            break
    return centroids, iterations, history


def kmeans_fit(
    X: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
    scale: bool = True,
    standardizer: Standardizer | None = None,
    n_init: int = 4,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding, in standardized space.

    Args:
        X: raw (n, d) feature matrix.
        k: number of clusters.
        seed: RNG seed for the seeding step.
        max_iter: cap on Lloyd iterations.
        tol: stop when no centroid moves more than this (Euclidean).
        scale: z-score features first; False clusters the raw values.
        standardizer: reuse an existing standardizer instead of fitting one.
        n_init: independent k-means++ restarts drawn from one seeded stream;
            the lowest final WCSS wins (earliest restart on ties).

    Returns:
        A fitted :class:`ClusterModel`. ``wcss_history`` holds the objective
        after each assignment step of the winning restart.
    """
    X = np.asarray(X, dtype=np.float64)
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot cluster an empty matrix")
    if standardizer is None:
        standardizer = fit_standardizer(X) if scale else Standardizer.identity(X.shape[1])
    Z = standardizer.transform(X)
    if n_init < 1:
        raise DataError(f"n_init must be >= 1, got {n_init}")
    if not _has_distinct(Z, k):
        raise DataError(f"fewer than {k} distinct rows; cannot form k={k} clusters")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(Z, k, rng, max_iter, tol)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    centroids, iterations, history = best
    return ClusterModel(
        centroids=centroids,
        standardizer=standardizer,
        wcss=history[-1],
        iterations_run=iterations,
        wcss_history=tuple(history),
    )


def _curve_seed(seed: int, k: int, attempt: int) -> int:
    return seed * 1_000_003 + k * 101 + attempt


def wcss_curve(
    X: np.ndarray,
    k_max: int = 10,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    scale: bool = True,
    retries: int = 5,
) -> list[tuple[int, float]]:
    """WCSS for k = 1..k_max, standardized once with the full-data statistics.

    A fit whose WCSS exceeds the previous k's is retried with a fresh derived
    seed (up to ``retries`` times); the best attempt is kept.
    """
    if k_max < 2:
        raise DataError(f"k_max must be >= 2, got {k_max}")
    X = np.asarray(X, dtype=np.float64)
    std = fit_standardizer(X) if scale else Standardizer.identity(X.shape[1])
    curve: list[tuple[int, float]] = []
    for k in range(1, k_max + 1):
        best = None
        for attempt in range(retries + 1):
            model = kmeans_fit(X, k, _curve_seed(seed, k, attempt), max_iter, tol,
                               standardizer=std)
            if best is None or model.wcss < best:
                best = model.wcss
            if not curve or best <= curve[-1][1]:
                break
        if curve and best > curve[-1][1]:
            logger.warning("wcss(k=%d)=%.6g exceeds wcss(k=%d) after retries", k, best, k - 1)
        curve.append((k, best))
    return curve


def select_k_elbow(curve: list[tuple[int, float]]) -> int:
    """k whose point lies farthest from the chord joining the curve's endpoints.

    Ties go to the smaller k. Endpoints have zero distance, so a straight-line
    curve yields its smallest interior k.
    """
    if len(curve) < 3:
        raise DataError("elbow selection needs at least 3 curve points")
    ks = np.array([float(k) for k, _ in curve])
    ws = np.array([float(w) for _, w in curve])
    if np.any(np.diff(ks) <= 0):
        raise DataError("curve k values must be strictly increasing")
    x0, y0, x1, y1 = ks[0], ws[0], ks[-1], ws[-1]
    # |cross product| / chord length
    norm = np.hypot(x1 - x0, y1 - y0)
    dist = np.abs((x1 - x0) * (y0 - ws) - (x0 - ks) * (y1 - y0)) / norm
    interior = dist[1:-1]
    # absorb rounding so exact geometric ties fall to the smaller k
    best = 1 + int(np.flatnonzero(interior >= interior.max() - 1e-12 * max(1.0, interior.max()))[0])
    return int(curve[best][0])


def fit_clusters(
    X: np.ndarray,
    k: int | None,
    seed: int,
    k_max: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
    scale: bool = True,
) -> ClusterModel:
    """Fit the routing clusterer; elbow-select k when ``k`` is None."""
    curve: list[tuple[int, float]] = []
    if k is None:
        curve = wcss_curve(X, k_max, seed, max_iter, tol, scale)
        k = select_k_elbow(curve)
        logger.info("elbow selected k=%d", k)
    model = kmeans_fit(X, k, seed, max_iter, tol, scale)
    return ClusterModel(model.centroids, model.standardizer, model.wcss, model.iterations_run,
                        tuple(curve), model.wcss_history)
