"""Confusion matrices, accuracy reports and the resampling-strategy comparison.

Matrices are oriented rows = true class, columns = predicted class, with the
class order [normal, attack]. Precision/recall columns in the reports are
supplementary; model selection never looks at them.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .classifiers import CONSTANT, KINDS, ClassifierSpec, TrainedClassifier, train
from .clustering import ClusterModel, fit_clusters
from .errors import DataError
from .flowdata import EncodedDataset
from .hybrid import SpecialistEnsemble
from .resample import ResampleConfig, Strategy, rebalance, rebalance_cluster

logger = logging.getLogger(__name__)

CLASS_NAMES = ("normal", "attack")
# column order of the strategy table: approach1, approach2, approach3
APPROACHES = (Strategy.NO_RESAMPLE, Strategy.PER_CLUSTER, Strategy.GLOBAL)


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts; ``counts[t, p]`` = rows of true class t predicted as p."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (2, 2):
            raise DataError("a confusion matrix is 2x2")
        if np.any(c < 0):
            raise DataError("confusion counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def precision(self, cls: int) -> float | None:
        col = int(self.counts[:, cls].sum())
        return None if col == 0 else int(self.counts[cls, cls]) / col

    def recall(self, cls: int) -> float | None:
        row = int(self.counts[cls].sum())
        return None if row == 0 else int(self.counts[cls, cls]) / row

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.counts + other.counts)

    def to_csv(self) -> str:
        """Labelled matrix: header ``true\\pred,normal,attack``, one line per true class."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *CLASS_NAMES])
        for t, name in enumerate(CLASS_NAMES):
            w.writerow([name, *(int(v) for v in self.counts[t])])
        return buf.getvalue()


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.size != y_pred.size:
        raise DataError(f"length mismatch: {y_true.size} true vs {y_pred.size} predicted labels")
    if y_true.size == 0:
        raise DataError("cannot build a confusion matrix from zero samples")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if not np.all((arr == 0) | (arr == 1)):
            raise DataError(f"{name} labels must be 0 (normal) or 1 (attack)")
    flat = np.bincount(2 * y_true.astype(np.int64) + y_pred.astype(np.int64), minlength=4)
    return ConfusionMatrix(flat.reshape(2, 2))


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise DataError("accuracy of an empty confusion matrix is undefined")
    return int(np.trace(cm.counts)) / total


@dataclass(frozen=True)
class ClusterResult:
    cluster: int
    matrix: ConfusionMatrix
    winner: str

    @property
    def count(self) -> int:
        return self.matrix.total

    @property
    def accuracy(self) -> float | None:
        """None when no test row was routed to this cluster."""
        return accuracy(self.matrix) if self.count else None


@dataclass(frozen=True)
class EvaluationReport:
    clusters: tuple[ClusterResult, ...]
    strategy_table: Mapping[tuple[str, int, str], float | None] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(r.count for r in self.clusters)

    @property
    def overall(self) -> ConfusionMatrix:
        out = ConfusionMatrix(np.zeros((2, 2), dtype=np.int64))
        for r in self.clusters:
            out = out + r.matrix
        return out

    @property
    def overall_accuracy(self) -> float:
        return accuracy(self.overall)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cluster", "winner", "count", "accuracy",
                    "tn", "fp", "fn", "tp",
                    "supp_precision_normal", "supp_recall_normal",
                    "supp_precision_attack", "supp_recall_attack"])
        for r in self.clusters:
            w.writerow([r.cluster, r.winner, r.count, _fmt(r.accuracy),
                        *(int(v) for v in r.matrix.counts.ravel()),
                        *_supplementary(r.matrix)])
        m = self.overall
        w.writerow(["all", "", m.total, _fmt(accuracy(m)), *(int(v) for v in m.counts.ravel()),
                    *_supplementary(m)])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ("cluster", "winner", "count", "accuracy", "tn", "fp", "fn", "tp",
                  "prec_n*", "rec_n*", "prec_a*", "rec_a*")
        rows = [(str(r.cluster), r.winner, str(r.count), _fmt(r.accuracy),
                 *(str(int(v)) for v in r.matrix.counts.ravel()), *_supplementary(r.matrix))
                for r in self.clusters]
        m = self.overall
        rows.append(("all", "", str(m.total), _fmt(accuracy(m)),
                     *(str(int(v)) for v in m.counts.ravel()), *_supplementary(m)))
        lines = [f"overall accuracy: {_fmt(self.overall_accuracy)} ({self.total} test rows)", "",
                 *_aligned(header, rows), "",
                 "* supplementary precision/recall per class (normal, attack); "
                 "selection uses accuracy only",
                 "matrices: rows = true class, columns = predicted class, order [normal, attack]"]
        return "\n".join(lines) + "\n"


def _fmt(v: float | None) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"


def _supplementary(cm: ConfusionMatrix) -> list[str]:
    return [_fmt(cm.precision(0)), _fmt(cm.recall(0)), _fmt(cm.precision(1)), _fmt(cm.recall(1))]


def _aligned(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    return [fmt(header), fmt(["-" * w for w in widths]), *(fmt(r) for r in rows)]


def evaluate_ensemble(ensemble: SpecialistEnsemble, test: EncodedDataset) -> EvaluationReport:
    """Route every test row, predict with its specialist, tally per cluster.

    The test rows are used as given; nothing here resamples them.
    """
    if test.n_rows == 0:
        raise DataError("empty test set")
    labels, clusters = ensemble.predict_batch(test.features)
    results = []
    for c in range(ensemble.k):
        rows = clusters == c
        counts = np.zeros((2, 2), dtype=np.int64)
        if rows.any():
            counts = confusion_matrix(test.labels[rows], labels[rows]).counts
        results.append(ClusterResult(c, ConfusionMatrix(counts), ensemble.selections[c].winner))
    return EvaluationReport(tuple(results))


def write_report(report: EvaluationReport, out_dir: str | Path) -> list[Path]:
    """Write report.txt, report.csv and confusion_cluster<i>.csv; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.txt", out / "report.csv"]
    written[0].write_text(report.to_text(), encoding="utf-8")
    written[1].write_text(report.to_csv(), encoding="utf-8")
    for r in report.clusters:
        p = out / f"confusion_cluster{r.cluster}.csv"
        p.write_text(r.matrix.to_csv(), encoding="utf-8")
        written.append(p)
    return written


# -- strategy comparison ----------------------------------------------------


@dataclass(frozen=True)
class StrategyTableConfig:
    k: int = 3
    seed: int = 0
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    kinds: tuple[str, ...] = KINDS
    params: Mapping[str, Mapping] = field(default_factory=dict)
    max_iter: int = 300
    tol: float = 1e-6
    scale: bool = True


@dataclass(frozen=True)
class StrategyTable:
    """accuracy[(kind, cluster, strategy value)]; None where a cluster got no test rows."""

    k: int
    kinds: tuple[str, ...]
    accuracy: Mapping[tuple[str, int, str], float | None]
    test_counts: Mapping[tuple[int, str], int] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "cluster", "approach1", "approach2", "approach3"])
        for kind in self.kinds:
            for c in range(self.k):
                w.writerow([kind, c, *(_fmt(self.accuracy[(kind, c, s.value)]) for s in APPROACHES)])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ("model", "cluster", "approach1 (none)", "approach2 (per-cluster)",
                  "approach3 (global)")
        rows = [(kind, str(c), *(_fmt(self.accuracy[(kind, c, s.value)]) for s in APPROACHES))
                for kind in self.kinds for c in range(self.k)]
        return "\n".join(_aligned(header, rows)) + "\n"


def _raw_centroids(model: ClusterModel) -> np.ndarray:
    return model.standardizer.inverse(model.centroids)


def _align(reference: ClusterModel, other: ClusterModel) -> np.ndarray:
    """perm[c_other] = matching reference cluster id (min total raw-centroid distance)."""
    a = _raw_centroids(reference)
    b = _raw_centroids(other)
    # compare in the reference's standardized units so no counter dominates
    za = reference.standardizer.transform(a)
    zb = reference.standardizer.transform(b)
    cost = ((zb[:, None, :] - za[None, :, :]) ** 2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(other.k, dtype=np.int64)
    perm[rows] = cols
    return perm


def _fit_or_constant(kind: str, part: EncodedDataset, cfg: StrategyTableConfig, seed: int):
    n0, n1 = part.class_counts()
    if n0 == 0 or n1 == 0:
        label = 1 if n1 else 0
        return train(ClassifierSpec(CONSTANT, {"label": label}, seed), part.features, part.labels)
    return train(ClassifierSpec(kind, cfg.params.get(kind, {}), seed), part.features, part.labels)


def cluster_models(
    train_data: EncodedDataset, strategy: Strategy, cfg: StrategyTableConfig
) -> tuple[ClusterModel, list[dict[str, TrainedClassifier]]]:
    """Cluster under ``strategy`` and train every kind in every cluster (no selection)."""
    data = rebalance(train_data, cfg.resample) if strategy is Strategy.GLOBAL else train_data
    model = fit_clusters(data.features, cfg.k, cfg.seed, max_iter=cfg.max_iter, tol=cfg.tol,
                         scale=cfg.scale)
    assignments = model.assign_batch(data.features)
    per_cluster = []
    for c in range(model.k):
        part = data.subset(np.flatnonzero(assignments == c))
        if strategy is Strategy.PER_CLUSTER:
            part = rebalance_cluster(part, cfg.resample, c)
        per_cluster.append({kind: _fit_or_constant(kind, part, cfg, cfg.seed + c)
                            for kind in cfg.kinds})
    return model, per_cluster


def strategy_table(
    train_data: EncodedDataset, test: EncodedDataset, config: StrategyTableConfig | None = None
) -> StrategyTable:
    """Per-cluster test accuracy of every kind under each resampling strategy.

    NoResample and PerCluster share one clustering of the raw training set.
    The Global strategy clusters the rebalanced set, so its cluster ids are
    relabelled to the NoResample ids by minimum-cost centroid matching before
    the rows are reported.
    """
    cfg = config or StrategyTableConfig()
    if test.n_rows == 0:
        raise DataError("empty test set")
    table: dict[tuple[str, int, str], float | None] = {}
    counts: dict[tuple[int, str], int] = {}
    reference: ClusterModel | None = None
    for strategy in APPROACHES:
        logger.info("strategy %s", strategy.value)
        model, per_cluster = cluster_models(train_data, strategy, cfg)
        if reference is None:
            reference = model
        perm = np.arange(model.k) if model is reference else _align(reference, model)
        routed = model.assign_batch(test.features)
        for c in range(model.k):
            rows = np.flatnonzero(routed == c)
            counts[(int(perm[c]), strategy.value)] = int(rows.size)
            for kind, clf in per_cluster[c].items():
                acc = None
                if rows.size:
                    acc = accuracy(confusion_matrix(test.labels[rows],
                                                    clf.predict(test.features[rows])))
                table[(kind, int(perm[c]), strategy.value)] = acc
    return StrategyTable(cfg.k, tuple(cfg.kinds), table, counts)
