"""Cluster-then-specialize ensemble: fitting, routed prediction and persistence.

Training data is partitioned with K-Means; in every cluster all six baseline
classifiers are scored on a held-out validation slice, the most accurate one
is retrained on the whole cluster, and at prediction time each sample is sent
to the specialist of its nearest centroid.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifiers import (
    CONSTANT,
    KINDS,
    ClassifierSpec,
    TrainedClassifier,
    canonical_kind,
    model_from_dict,
    train,
)
from .clustering import ClusterModel, fit_clusters
from .errors import DataError, ModelFileError
from .flowdata import CategoryEncoder, EncodedDataset, SchemaConfig, stratified_split_indices
from .resample import ResampleConfig, Strategy, rebalance, rebalance_cluster

logger = logging.getLogger(__name__)

FORMAT_NAME = "hybridids-ensemble"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)

# reproduces the published picks: knn where rf/gb/knn tie, then entropy trees
DEFAULT_PREFERENCE = ("knn", "dtEntropy", "dtGini", "gnb", "rf", "gbt")
VALIDATION_FRACTION = 0.2


@dataclass(frozen=True)
class SelectionRecord:
    cluster: int
    accuracies: Mapping[str, float]
    winner: str
    tie_broken: bool
    validation_row_count: int
    train_row_count: int = 0
    # (normal, attack) counts of the cluster before any per-cluster resampling
    class_counts: tuple[int, int] = (0, 0)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "accuracies": dict(self.accuracies),
            "winner": self.winner,
            "tie_broken": self.tie_broken,
            "validation_row_count": self.validation_row_count,
            "train_row_count": self.train_row_count,
            "class_counts": list(self.class_counts),
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SelectionRecord:
        return cls(
            cluster=int(d["cluster"]),
            accuracies={k: float(v) for k, v in d["accuracies"].items()},
            winner=d["winner"],
            tie_broken=bool(d["tie_broken"]),
            validation_row_count=int(d["validation_row_count"]),
            train_row_count=int(d["train_row_count"]),
            class_counts=tuple(d["class_counts"]),
            note=d.get("note", ""),
        )


@dataclass(frozen=True)
class SpecialistEnsemble:
    cluster_model: ClusterModel
    specialists: tuple[TrainedClassifier, ...]
    selections: tuple[SelectionRecord, ...]
    feature_names: tuple[str, ...] = ()
    encoders: tuple[CategoryEncoder, ...] = ()
    schema: SchemaConfig | None = None
    format_version: int = FORMAT_VERSION
    settings: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        k = self.cluster_model.k
        if len(self.specialists) != k or len(self.selections) != k:
            raise DataError(
                f"ensemble needs one specialist and one selection per cluster (k={k})"
            )

    @property
    def k(self) -> int:
        return self.cluster_model.k

    def predict_batch(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(labels, cluster ids) for each row of ``X``, in input order."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError("expected a 2-d matrix of samples")
        clusters = self.cluster_model.assign_batch(X)
        labels = np.zeros(X.shape[0], dtype=np.int64)
        for c in range(self.k):
            rows = np.flatnonzero(clusters == c)
            if rows.size:
                labels[rows] = self.specialists[c].predict(X[rows])
        return labels, clusters


def predict_routed(ensemble: SpecialistEnsemble, sample: np.ndarray) -> tuple[int, int]:
    """(label, cluster) for one encoded feature vector."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 1:
        raise DataError("predict_routed expects a single feature vector")
    labels, clusters = ensemble.predict_batch(sample[None, :])
    return int(labels[0]), int(clusters[0])


def select_model(accuracies: Mapping[str, float], preference_order: Sequence[str] = DEFAULT_PREFERENCE) -> str:
    """Most accurate kind; exact ties go to the earliest kind in ``preference_order``."""
    if not accuracies:
        raise DataError("no model accuracies to select from")
    rank = {kind: i for i, kind in enumerate(preference_order)}
    missing = [k for k in accuracies if k not in rank]
    if missing:
        raise DataError(f"preference order does not rank {missing}")
    top = max(accuracies.values())
    return min((k for k, a in accuracies.items() if a == top), key=rank.__getitem__)


def parse_preference(text: str | Sequence[str] | None) -> tuple[str, ...]:
    """Normalize a preference order, completing it with the default order."""
    if text is None:
        return DEFAULT_PREFERENCE
    items = text.split(",") if isinstance(text, str) else list(text)
    kinds = [canonical_kind(s.strip()) for s in items if s.strip()]
    if len(set(kinds)) != len(kinds):
        raise DataError(f"duplicate kinds in preference order: {kinds}")
    return tuple(kinds) + tuple(k for k in DEFAULT_PREFERENCE if k not in kinds)


def _accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    return float(np.count_nonzero(y_true == y_pred)) / y_true.size


def select_specialist(
    data: EncodedDataset,
    cluster: int,
    seed: int,
    preference_order: Sequence[str] = DEFAULT_PREFERENCE,
    kinds: Sequence[str] = KINDS,
    params: Mapping[str, Mapping] | None = None,
    class_counts: tuple[int, int] | None = None,
) -> tuple[TrainedClassifier, SelectionRecord]:
    """Score every kind on an 80/20 split of ``data``, retrain the winner on all of it."""
    params = params or {}
    n0, n1 = data.class_counts()
    counts = class_counts if class_counts is not None else (n0, n1)
    if n0 == 0 or n1 == 0:
        label = 1 if n1 else 0
        logger.warning("cluster %d is single-class; using a constant classifier (%d)", cluster, label)
        spec = ClassifierSpec(CONSTANT, {"label": label}, seed)
        model = train(spec, data.features, data.labels)
        record = SelectionRecord(cluster, {}, CONSTANT, False, 0, data.n_rows, counts, "constant")
        return model, record

    note = ""
    if min(n0, n1) >= 2:
        fit_idx, val_idx = stratified_split_indices(data.labels, 1.0 - VALIDATION_FRACTION, seed)
    else:
        logger.warning("cluster %d has a single minority row; scoring on training rows", cluster)
        fit_idx = val_idx = np.arange(data.n_rows)
        note = "resubstitution"
    X_fit, y_fit = data.features[fit_idx], data.labels[fit_idx]
    X_val, y_val = data.features[val_idx], data.labels[val_idx]

    accuracies: dict[str, float] = {}
    for kind in kinds:
        spec = ClassifierSpec(kind, params.get(kind, {}), seed)
        try:
            model = train(spec, X_fit, y_fit)
        except DataError as exc:
            logger.warning("cluster %d: %s skipped (%s)", cluster, kind, exc)
            continue
        accuracies[kind] = _accuracy(y_val, model.predict(X_val))
    winner = select_model(accuracies, preference_order)
    top = accuracies[winner]
    tie = sum(1 for a in accuracies.values() if a == top) >= 2
    final = train(ClassifierSpec(winner, params.get(winner, {}), seed), data.features, data.labels)
    record = SelectionRecord(cluster, accuracies, winner, tie, int(val_idx.size), data.n_rows,
                             counts, note)
    logger.info("cluster %d: winner %s (acc %.6f%s)", cluster, winner, top,
                ", tie broken" if tie else "")
    return final, record


def fit_hybrid(
    train_data: EncodedDataset,
    strategy: Strategy = Strategy.PER_CLUSTER,
    resample_config: ResampleConfig | None = None,
    k_override: int | None = 3,
    preference_order: Sequence[str] = DEFAULT_PREFERENCE,
    seed: int = 0,
    *,
    k_max: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
    scale: bool = True,
    kinds: Sequence[str] = KINDS,
    params: Mapping[str, Mapping] | None = None,
    schema: SchemaConfig | None = None,
) -> SpecialistEnsemble:
    """Cluster the training data and pick one specialist per cluster.

    Args:
        train_data: encoded training rows (both classes present).
        strategy: NO_RESAMPLE, GLOBAL (rebalance before clustering) or
            PER_CLUSTER (rebalance inside each cluster after assignment).
        resample_config: SMOTE/undersampling settings.
        k_override: number of clusters; None selects k by the elbow rule.
        preference_order: tie-break order for equal validation accuracies.
        seed: base seed; cluster c uses ``seed + c`` for its split and models.
    """
    cfg = resample_config or ResampleConfig(seed=seed)
    if train_data.n_rows == 0:
        raise DataError("empty training set")
    n0, n1 = train_data.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("training data must contain both normal and attack rows")

    data = rebalance(train_data, cfg) if strategy is Strategy.GLOBAL else train_data
    cluster_model = fit_clusters(data.features, k_override, seed, k_max, max_iter, tol, scale)
    assignments = cluster_model.assign_batch(data.features)

    specialists, selections = [], []
    for c in range(cluster_model.k):
        part = data.subset(np.flatnonzero(assignments == c))
        counts = part.class_counts()
        if strategy is Strategy.PER_CLUSTER:
            part = rebalance_cluster(part, cfg, c)
        model, record = select_specialist(part, c, seed + c, preference_order, kinds, params,
                                          counts)
        specialists.append(model)
        selections.append(record)

    settings = {
        "strategy": strategy.value,
        "seed": seed,
        "k_override": k_override,
        "scale": scale,
        "preference_order": list(preference_order),
        "resample": {"smote_k": cfg.smote_k, "target_ratio": cfg.target_ratio,
                     "seed": cfg.seed, "oversample_ratio": cfg.oversample_ratio},
    }
    return SpecialistEnsemble(
        cluster_model=cluster_model,
        specialists=tuple(specialists),
        selections=tuple(selections),
        feature_names=train_data.feature_names,
        encoders=train_data.encoders,
        schema=schema,
        settings=settings,
    )


def fit_global_baselines(
    train_data: EncodedDataset,
    strategy: Strategy = Strategy.PER_CLUSTER,
    resample_config: ResampleConfig | None = None,
    seed: int = 0,
    kinds: Sequence[str] = KINDS,
    params: Mapping[str, Mapping] | None = None,
) -> dict[str, TrainedClassifier]:
    """One classifier of each kind on the whole training set (no clustering).

    Any resampling strategy other than NO_RESAMPLE rebalances the full set,
    since there are no clusters to resample within.
    """
    cfg = resample_config or ResampleConfig(seed=seed)
    params = params or {}
    data = train_data if strategy is Strategy.NO_RESAMPLE else rebalance(train_data, cfg)
    return {
        kind: train(ClassifierSpec(kind, params.get(kind, {}), seed), data.features, data.labels)
        for kind in kinds
    }


# -- persistence ------------------------------------------------------------


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _checksum(payload: dict) -> str:
    return "sha256:" + hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def ensemble_to_dict(ensemble: SpecialistEnsemble) -> dict:
    payload = {
        "schema": ensemble.schema.to_dict() if ensemble.schema else None,
        "feature_names": list(ensemble.feature_names),
        "encoders": [e.to_dict() for e in ensemble.encoders],
        "cluster_model": ensemble.cluster_model.to_dict(),
        "specialists": [m.to_dict() for m in ensemble.specialists],
        "selections": [s.to_dict() for s in ensemble.selections],
        "settings": dict(ensemble.settings),
    }
    return {
        "format": FORMAT_NAME,
        "format_version": ensemble.format_version,
        "k": ensemble.k,
        "checksum": _checksum(payload),
        "payload": payload,
    }


def save_ensemble(ensemble: SpecialistEnsemble, path: str | Path) -> None:
    """Write the ensemble as a checksummed JSON document (deterministic bytes)."""
    doc = ensemble_to_dict(ensemble)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_ensemble(path: str | Path) -> SpecialistEnsemble:
    p = Path(path)
    if not p.is_file():
        raise ModelFileError(f"model file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"{p}: corrupt model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFileError(f"{p}: not a {FORMAT_NAME} file")
    version = doc.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise ModelFileError(f"{p}: unsupported format version {version!r}")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or doc.get("checksum") != _checksum(payload):
        raise ModelFileError(f"{p}: checksum mismatch, file is corrupt or was modified")
    try:
        schema = SchemaConfig.from_dict(payload["schema"]) if payload["schema"] else None
        ensemble = SpecialistEnsemble(
            cluster_model=ClusterModel.from_dict(payload["cluster_model"]),
            specialists=tuple(model_from_dict(m) for m in payload["specialists"]),
            selections=tuple(SelectionRecord.from_dict(s) for s in payload["selections"]),
            feature_names=tuple(payload["feature_names"]),
            encoders=tuple(CategoryEncoder.from_dict(e) for e in payload["encoders"]),
            schema=schema,
            format_version=version,
            settings=payload["settings"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"{p}: malformed model payload ({exc})") from None
    if ensemble.k != doc.get("k"):
        raise ModelFileError(f"{p}: header k={doc.get('k')} but payload has {ensemble.k} clusters")
    return ensemble
