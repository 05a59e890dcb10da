"""The six baseline classifiers behind one train/predict contract."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np
from scipy.special import logsumexp

from .._neighbors import kneighbors
from ..clustering import Standardizer, fit_standardizer
from ..errors import DataError
from .tree import Tree, grow_classifier, grow_regressor, presort

KINDS = ("dtGini", "dtEntropy", "rf", "gnb", "gbt", "knn")
CONSTANT = "constant"

# table/text names used for the same models
ALIASES = {"nb": "gnb", "gb": "gbt", "xgboost": "gbt"}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "dtGini": {"max_depth": None, "min_samples_split": 2},
    "dtEntropy": {"max_depth": None, "min_samples_split": 2},
    "rf": {"n_trees": 100, "features_per_split": None, "bootstrap": True,
           "max_depth": None, "min_samples_split": 2, "criterion": "gini"},
    "gbt": {"n_rounds": 100, "tree_depth": 3, "learning_rate": 0.1},
    "knn": {"k": 5, "standardize": True},
    "gnb": {"var_smoothing": 1e-9},
    CONSTANT: {"label": 1},
}


def canonical_kind(name: str) -> str:
    kind = ALIASES.get(name, name)
    if kind not in DEFAULT_PARAMS:
        raise DataError(f"unknown classifier kind {name!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        unknown = set(self.params) - set(DEFAULT_PARAMS[kind])
        if unknown:
            raise DataError(f"{kind}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULT_PARAMS[kind], **self.params}
        _validate(kind, merged)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", MappingProxyType(merged))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> ClassifierSpec:
        return cls(d["kind"], d["params"], d["seed"])


def _validate(kind: str, p: dict) -> None:
    def positive(name):
        if p[name] is not None and (not isinstance(p[name], int) or p[name] < 1):
            raise DataError(f"{kind}: {name} must be a positive integer, got {p[name]!r}")

    if kind in ("dtGini", "dtEntropy", "rf"):
        positive("max_depth")
        if p["min_samples_split"] < 2:
            raise DataError(f"{kind}: min_samples_split must be >= 2")
    if kind == "rf":
        positive("n_trees")
        positive("features_per_split")
        if p["criterion"] not in ("gini", "entropy"):
            raise DataError("rf: criterion must be gini or entropy")
    elif kind == "gbt":
        positive("n_rounds")
        positive("tree_depth")
        if not p["learning_rate"] > 0:
            raise DataError("gbt: learning_rate must be positive")
    elif kind == "knn":
        positive("k")
    elif kind == "gnb":
        if p["var_smoothing"] < 0:
            raise DataError("gnb: var_smoothing must be >= 0")
    elif kind == CONSTANT and p["label"] not in (0, 1):
        raise DataError("constant: label must be 0 or 1")


class TrainedClassifier:
    """Learned state plus the spec that produced it. Immutable once built."""

    spec: ClassifierSpec
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self._predict(X)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def state(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "n_features": self.n_features, "state": self.state()}


@dataclass(frozen=True, eq=False)
class DecisionTreeModel(TrainedClassifier):
    spec: ClassifierSpec
    n_features: int
    tree: Tree

    def _predict(self, X):
        return self.tree.predict_class(X)

    def state(self):
        return {"tree": self.tree.to_dict()}


@dataclass(frozen=True, eq=False)
class RandomForestModel(TrainedClassifier):
    spec: ClassifierSpec
    n_features: int
    trees: tuple[Tree, ...]

    def _predict(self, X):
        votes = np.zeros(X.shape[0], dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict_class(X)
        # even vote split goes to attack
        return (2 * votes >= len(self.trees)).astype(np.int64)

    def state(self):
        return {"trees": [t.to_dict() for t in self.trees]}


@dataclass(frozen=True, eq=False)
class GaussianNBModel(TrainedClassifier):
    spec: ClassifierSpec
    n_features: int
    log_prior: np.ndarray  # (2,)
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            var = self.variances[c]
            out[:, c] = (
                self.log_prior[c]
                - 0.5 * np.sum(np.log(2.0 * np.pi * var))
                - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
            )
        return out

    def log_posteriors(self, X: np.ndarray) -> np.ndarray:
        """Normalized class log-posteriors, columns [normal, attack]."""
        jll = self.joint_log_likelihood(X)
        return jll - logsumexp(jll, axis=1, keepdims=True)

    def _predict(self, X):
        jll = self.joint_log_likelihood(X)
        return (jll[:, 1] >= jll[:, 0]).astype(np.int64)

    def state(self):
        return {"log_prior": self.log_prior.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist()}


@dataclass(frozen=True, eq=False)
class GradientBoostingModel(TrainedClassifier):
    spec: ClassifierSpec
    n_features: int
    init_score: float
    trees: tuple[Tree, ...]
    loss_history: tuple[float, ...] = ()

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        F = np.full(X.shape[0], self.init_score)
        for tree in self.trees:
            F += tree.predict_value(X)
        return F

    def _predict(self, X):
        # sigmoid(F) >= 0.5  <=>  F >= 0
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def state(self):
        return {"init_score": self.init_score, "trees": [t.to_dict() for t in self.trees],
                "loss_history": list(self.loss_history)}


@dataclass(frozen=True, eq=False)
class KNNModel(TrainedClassifier):
    spec: ClassifierSpec
    n_features: int
    standardizer: Standardizer
    train_z: np.ndarray
    train_labels: np.ndarray

    def neighbors(self, X: np.ndarray) -> np.ndarray:
        return kneighbors(self.standardizer.transform(X), self.train_z, self.spec.params["k"])

    def _predict(self, X):
        k = self.spec.params["k"]
        nbrs = self.neighbors(X)
        votes = self.train_labels[nbrs].sum(axis=1)
        out = (2 * votes > k).astype(np.int64)
        tied = 2 * votes == k
        out[tied] = self.train_labels[nbrs[tied, 0]]
        return out

    def state(self):
        return {"standardizer": self.standardizer.to_dict(), "train_z": self.train_z.tolist(),
                "train_labels": self.train_labels.tolist()}


@dataclass(frozen=True, eq=False)
class ConstantModel(TrainedClassifier):
    spec: ClassifierSpec
    n_features: int

    def _predict(self, X):
        return np.full(X.shape[0], self.spec.params["label"], dtype=np.int64)

    def state(self):
        return {}


def _fit_tree(spec, X, y):
    criterion = "gini" if spec.kind == "dtGini" else "entropy"
    tree = grow_classifier(X, y, criterion, spec.params["max_depth"],
                           spec.params["min_samples_split"])
    return DecisionTreeModel(spec, X.shape[1], tree)


def _fit_forest(spec, X, y):
    p = spec.params
    n, d = X.shape
    m = p["features_per_split"] or max(1, int(math.floor(math.sqrt(d))))
    m = min(m, d)
    rng = np.random.default_rng(spec.seed)
    trees = []
    for t in range(p["n_trees"]):
        if p["bootstrap"]:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        trees.append(grow_classifier(Xb, yb, p["criterion"], p["max_depth"],
                                     p["min_samples_split"], m,
                                     np.random.default_rng([spec.seed, t])))
    return RandomForestModel(spec, d, tuple(trees))


def _fit_gnb(spec, X, y):
    eps = spec.params["var_smoothing"] * float(np.max(X.var(axis=0))) if X.shape[1] else 0.0
    if eps <= 0:
        eps = spec.params["var_smoothing"] or 1e-300
    counts = np.bincount(y, minlength=2).astype(np.float64)
    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([X[y == c].var(axis=0) for c in (0, 1)]) + eps
    return GaussianNBModel(spec, X.shape[1], np.log(counts / counts.sum()), means, variances)


def logistic_loss(y: np.ndarray, F: np.ndarray) -> float:
    """Mean binary cross-entropy of log-odds ``F``."""
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


def _sigmoid(F):
    return np.exp(-np.logaddexp(0.0, -F))


def _fit_gbt(spec, X, y):
    p = spec.params
    lr = p["learning_rate"]
    prior = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    init = math.log(prior / (1 - prior))
    F = np.full(X.shape[0], init)
    yf = y.astype(np.float64)
    losses = [logistic_loss(yf, F)]
    sorted_idx = presort(X)
    trees = []
    for _ in range(p["n_rounds"]):
        prob = _sigmoid(F)
        grad = yf - prob
        hess = prob * (1.0 - prob)
        tree = grow_regressor(X, grad, hess, p["tree_depth"], sorted_idx)
        leaf_steps = lr * tree.value
        step = leaf_steps[tree.apply(X)]
        loss = logistic_loss(yf, F + step)
        # Newton steps almost always descend; halve the round's step if one does not
        shrink = 0
        while loss > losses[-1] and shrink < 40:
            leaf_steps = leaf_steps * 0.5
            step = step * 0.5
            loss = logistic_loss(yf, F + step)
            shrink += 1
        if loss > losses[-1]:
            leaf_steps = np.zeros_like(leaf_steps)
            step = np.zeros_like(step)
            loss = losses[-1]
        F = F + step
        trees.append(Tree(tree.feature, tree.threshold, tree.left, tree.right, leaf_steps))
        losses.append(loss)
    return GradientBoostingModel(spec, X.shape[1], init, tuple(trees), tuple(losses))


def _fit_knn(spec, X, y):
    k = spec.params["k"]
    if k > X.shape[0]:
        raise DataError(f"knn: k={k} exceeds the {X.shape[0]} training rows")
    std = fit_standardizer(X) if spec.params["standardize"] else Standardizer.identity(X.shape[1])
    return KNNModel(spec, X.shape[1], std, std.transform(X), y.copy())


_FITTERS = {
    "dtGini": _fit_tree,
    "dtEntropy": _fit_tree,
    "rf": _fit_forest,
    "gnb": _fit_gnb,
    "gbt": _fit_gbt,
    "knn": _fit_knn,
    CONSTANT: lambda spec, X, y: ConstantModel(spec, X.shape[1]),
}


def train(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray) -> TrainedClassifier:
    """Fit the model described by ``spec``. Deterministic for a fixed ``spec.seed``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot train on empty data")
    if y.shape != (X.shape[0],):
        raise DataError("labels do not match the number of rows")
    if spec.kind != CONSTANT and np.unique(y).size < 2:
        raise DataError(f"{spec.kind}: training data holds a single class")
    return _FITTERS[spec.kind](spec, X, y)


def predict(model: TrainedClassifier, sample: np.ndarray) -> int:
    """Label (0 normal, 1 attack) for a single feature vector."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 1:
        raise DataError("predict expects one feature vector; use model.predict for batches")
    return int(model.predict(sample[None, :])[0])


def model_from_dict(d: dict) -> TrainedClassifier:
    spec = ClassifierSpec.from_dict(d["spec"])
    n_features = int(d["n_features"])
    s = d["state"]
    kind = spec.kind
    if kind in ("dtGini", "dtEntropy"):
        return DecisionTreeModel(spec, n_features, Tree.from_dict(s["tree"]))
    if kind == "rf":
        return RandomForestModel(spec, n_features, tuple(Tree.from_dict(t) for t in s["trees"]))
    if kind == "gnb":
        return GaussianNBModel(spec, n_features, np.asarray(s["log_prior"], dtype=np.float64),
                               np.asarray(s["means"], dtype=np.float64).reshape(2, n_features),
                               np.asarray(s["variances"], dtype=np.float64).reshape(2, n_features))
    if kind == "gbt":
        return GradientBoostingModel(spec, n_features, float(s["init_score"]),
                                     tuple(Tree.from_dict(t) for t in s["trees"]),
                                     tuple(s["loss_history"]))
    if kind == "knn":
        z = np.asarray(s["train_z"], dtype=np.float64).reshape(-1, n_features)
        return KNNModel(spec, n_features, Standardizer.from_dict(s["standardizer"]), z,
                        np.asarray(s["train_labels"], dtype=np.int64))
    return ConstantModel(spec, n_features)
