"""Exact k-nearest-neighbour search with deterministic tie-breaking.

Candidates are found with the fast ``|a|^2 + |b|^2 - 2ab`` expansion, then the
final ordering uses directly computed squared differences so results match a
naive scan bit for bit: sorted by (distance, reference index).
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def _sq_dists(queries: np.ndarray, reference: np.ndarray, ref_norms: np.ndarray) -> np.ndarray:
    q_norms = np.einsum("ij,ij->i", queries, queries)
    d = q_norms[:, None] + ref_norms[None, :] - 2.0 * (queries @ reference.T)
    np.maximum(d, 0.0, out=d)
    return d


def kneighbors(
    queries: np.ndarray,
    reference: np.ndarray,
    k: int,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Indices of the ``k`` nearest reference rows for each query row.

    Args:
        queries: (q, d) matrix.
        reference: (n, d) matrix.
        k: neighbours per query; must not exceed the available reference rows.
        exclude: optional per-query reference index that must not be returned
            (the query's own row when searching a set against itself).

    Returns:
        (q, k) int array ordered nearest first; equal distances keep the lower
        reference index first.
    """
    queries = np.asarray(queries, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    n = reference.shape[0]
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=np.int64)
    available = n - 1 if exclude is not None else n
    if not 1 <= k <= available:
        raise ValueError(f"k={k} but only {available} reference rows are available")
    ref_norms = np.einsum("ij,ij->i", reference, reference)
    scale = float(np.max(ref_norms)) if n else 0.0
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for start in range(0, queries.shape[0], _CHUNK):
        block = queries[start:start + _CHUNK]
        approx = _sq_dists(block, reference, ref_norms)
        if exclude is not None:
            skip = exclude[start:start + _CHUNK]
            approx[np.arange(block.shape[0]), skip] = np.inf
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        # slack covers the cancellation error of the expansion
        slack = 1e-9 * (scale + np.einsum("ij,ij->i", block, block)) + 1e-12
        for r in range(block.shape[0]):
            cand = np.flatnonzero(approx[r] <= kth[r] + slack[r])
            if exclude is not None:
                cand = cand[cand != skip[r]]
            diff = reference[cand] - block[r]
            exact = np.einsum("ij,ij->i", diff, diff)
            order = np.lexsort((cand, exact))
            out[start + r] = cand[order[:k]]
    return out


def sq_distances_exact(query: np.ndarray, reference: np.ndarray) -> np.ndarray:
    diff = reference - query
    return np.einsum("ij,ij->i", diff, diff)
