"""SMOTE oversampling, random undersampling and the three resampling strategies."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from ._neighbors import kneighbors
from .errors import DataError
from .flowdata import EncodedDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResampleConfig:
    """Resampling knobs.

    ``oversample_ratio`` bounds how far SMOTE alone raises the minority
    (as a fraction of the majority count); random undersampling of the
    majority then closes the remaining gap to ``target_ratio``.
    """

    smote_k: int = 5
    target_ratio: float = 1.0
    seed: int = 0
    oversample_ratio: float = 0.5

    def __post_init__(self):
        if self.smote_k < 1:
            raise DataError(f"smote_k must be >= 1, got {self.smote_k}")
        if not 0.0 < self.target_ratio <= 1.0:
            raise DataError(f"target_ratio must lie in (0, 1], got {self.target_ratio}")
        if not 0.0 < self.oversample_ratio <= 1.0:
            raise DataError(f"oversample_ratio must lie in (0, 1], got {self.oversample_ratio}")


class Strategy(enum.Enum):
    NO_RESAMPLE = "none"
    PER_CLUSTER = "per-cluster"
    GLOBAL = "global"

    @classmethod
    def parse(cls, text: str) -> Strategy:
        try:
            return cls(text)
        except ValueError:
            raise DataError(
                f"unknown strategy {text!r}; choose from {[s.value for s in cls]}"
            ) from None


@dataclass(frozen=True)
class SmoteResult:
    rows: np.ndarray
    base: np.ndarray
    neighbor: np.ndarray
    lam: np.ndarray


def smote_with_provenance(
    minority: np.ndarray,
    k: int,
    n_synthetic: int,
    seed: int,
    lam: float | None = None,
) -> SmoteResult:
    """SMOTE, also returning which rows each synthetic sample came from.

    Args:
        minority: (m, d) minority-class rows, m >= 2.
        k: neighbour count; capped at m - 1.
        n_synthetic: number of rows to create.
        seed: RNG seed.
        lam: fix the interpolation weight instead of drawing it.
    """
    minority = np.asarray(minority, dtype=np.float64)
    m = minority.shape[0]
    if m < 2:
        raise DataError(f"SMOTE needs at least 2 minority rows, got {m}")
    if n_synthetic < 0:
        raise DataError(f"n_synthetic must be >= 0, got {n_synthetic}")
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    k_eff = min(k, m - 1)
    rng = np.random.default_rng(seed)
    base = rng.integers(0, m, size=n_synthetic)
    pick = rng.integers(0, k_eff, size=n_synthetic)
    lams = rng.random(n_synthetic) if lam is None else np.full(n_synthetic, float(lam))

    uniq, inverse = np.unique(base, return_inverse=True)
    if uniq.size:
        nbrs = kneighbors(minority[uniq], minority, k_eff, exclude=uniq)
        neighbor = nbrs[inverse, pick]
    else:
        neighbor = np.empty(0, dtype=np.int64)
    b = minority[base]
    rows = b + lams[:, None] * (minority[neighbor] - b)
    return SmoteResult(rows.reshape(n_synthetic, minority.shape[1]), base, neighbor, lams)


def smote(
    minority: np.ndarray, k: int, n_synthetic: int, seed: int, lam: float | None = None
) -> np.ndarray:
    """``n_synthetic`` rows interpolated between minority rows and their near neighbours."""
    return smote_with_provenance(minority, k, n_synthetic, seed, lam).rows


def undersample_indices(n_rows: int, target_count: int, seed: int) -> np.ndarray:
    if target_count <= 0:
        raise DataError(f"target_count must be positive, got {target_count}")
    if target_count > n_rows:
        raise DataError(f"target_count {target_count} exceeds the {n_rows} available rows")
    rng = np.random.default_rng(seed)
    return rng.choice(n_rows, size=target_count, replace=False)


def random_undersample(majority: np.ndarray, target_count: int, seed: int) -> np.ndarray:
    """Seeded sample of ``target_count`` distinct rows, without replacement."""
    majority = np.asarray(majority)
    return majority[undersample_indices(majority.shape[0], target_count, seed)]


def rebalance_counts(minority: int, majority: int, config: ResampleConfig) -> tuple[int, int]:
    """Class sizes after :func:`rebalance`, as (minority, majority)."""
    first = min(config.oversample_ratio, config.target_ratio)
    m_new = max(minority, math.ceil(first * majority))
    m_major = min(majority, max(m_new, int(math.floor(m_new / config.target_ratio + 0.5))))
    return m_new, m_major


def rebalance(data: EncodedDataset, config: ResampleConfig) -> EncodedDataset:
    """SMOTE the minority class, then undersample the majority toward ``target_ratio``.

    Kept majority rows stay in their original order, all original minority
    rows are kept, and synthetic rows are appended at the end.
    """
    n0, n1 = data.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("rebalance needs both classes present")
    if n0 == n1:
        return data
    minority_label = 0 if n0 < n1 else 1
    m, big = min(n0, n1), max(n0, n1)
    m_new, big_new = rebalance_counts(m, big, config)

    y = data.labels
    X = data.features
    minority_idx = np.flatnonzero(y == minority_label)
    majority_idx = np.flatnonzero(y != minority_label)
    synth = smote(X[minority_idx], config.smote_k, m_new - m, config.seed)
    keep = np.sort(majority_idx[undersample_indices(big, big_new, config.seed + 1)])

    mask = np.zeros(data.n_rows, dtype=bool)
    mask[minority_idx] = True
    mask[keep] = True
    features = np.vstack([X[mask], synth])
    labels = np.concatenate([y[mask], np.full(synth.shape[0], minority_label, dtype=np.int64)])
    logger.debug("rebalance %d/%d -> %d/%d", m, big, m_new, big_new)
    return data.with_rows(features, labels)


def apply_strategy(
    strategy: Strategy,
    data: EncodedDataset,
    cluster_assignments: np.ndarray | None,
    config: ResampleConfig,
    n_clusters: int | None = None,
) -> EncodedDataset | list[EncodedDataset]:
    """Apply one of the three resampling strategies.

    Returns the dataset itself for ``NO_RESAMPLE``, one rebalanced dataset for
    ``GLOBAL``, and a list indexed by cluster id for ``PER_CLUSTER``.
    """
    if strategy is Strategy.NO_RESAMPLE:
        return data
    if strategy is Strategy.GLOBAL:
        return rebalance(data, config)
    if cluster_assignments is None:
        raise DataError("per-cluster resampling needs cluster assignments")
    assignments = np.asarray(cluster_assignments)
    if assignments.shape != (data.n_rows,):
        raise DataError("cluster assignments must align with the data rows")
    if n_clusters is None:
        n_clusters = int(assignments.max()) + 1 if assignments.size else 0
    return [
        rebalance_cluster(data.subset(np.flatnonzero(assignments == c)), config, c)
        for c in range(n_clusters)
    ]


def rebalance_cluster(part: EncodedDataset, config: ResampleConfig, cluster: int) -> EncodedDataset:
    """Rebalance one cluster's rows with a derived seed; pass through when impossible."""
    n0, n1 = part.class_counts()
    if n0 == 0 or n1 == 0:
        logger.warning("cluster %d holds a single class (%d/%d); left unresampled", cluster, n0, n1)
        return part
    if min(n0, n1) < 2:
        logger.warning("cluster %d has one minority row; SMOTE impossible, left unresampled", cluster)
        return part
    derived = ResampleConfig(config.smote_k, config.target_ratio, config.seed + cluster,
                             config.oversample_ratio)
    return rebalance(part, derived)
