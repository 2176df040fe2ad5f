"""Random forest and gradient-boosted trees for binary features.

Both learners grow trees with the compiled kernels in ``_kernels``; because
every feature is 0/1, a split is just "feature present or not" and split
search needs no sorting or binning.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from . import _kernels
from ._parallel import ordered_map
from .data import BinaryDataset, FeatureCatalog
from .errors import ConfigError, SingleClassDataset, WidthMismatch
from .seeding import derive_rng, derive_seed

Kind = Literal["random_forest", "gbdt"]
KINDS = ("random_forest", "gbdt")


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters; ``max_depth=None`` means unlimited depth.

    ``feature_subsample`` (forest only) is ``"sqrt"``, ``"all"``, an int count
    or a float fraction of the catalog.
    """

    kind: Kind = "random_forest"
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    learning_rate: float = 0.1
    feature_subsample: str | int | float = "sqrt"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown learner kind {self.kind!r}")
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 (or None)")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")

    @classmethod
    def default(cls, kind: Kind, seed: int = 0) -> "LearnerConfig":
        if kind == "gbdt":
            return cls("gbdt", n_trees=100, max_depth=6, min_samples_leaf=20, learning_rate=0.1, seed=seed)
        return cls("random_forest", n_trees=100, max_depth=None, min_samples_leaf=1, seed=seed)

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown learner settings: {sorted(unknown)}")
        base = asdict(cls.default(d.get("kind", "random_forest")))
        base.update(d)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    def max_features(self, n_features: int) -> int:
        rule = self.feature_subsample
        if rule == "sqrt":
            m = math.ceil(math.sqrt(n_features))
        elif rule == "all":
            m = n_features
        elif isinstance(rule, float):
            m = math.ceil(rule * n_features)
        elif isinstance(rule, int):
            m = rule
        else:
            raise ConfigError(f"bad feature_subsample {rule!r}")
        return max(1, min(n_features, m))


@dataclass(frozen=True, eq=False)
class Tree:
    """One tree as parallel arrays. Leaves have ``feature == -1``."""

    feature: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        return int(_kernels.max_path_length(self.left, self.right, self.feature, np.zeros(1, np.int64)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.uint8)
        return _kernels.predict_trees(X, self.feature, self.left, self.right, self.value,
                                      np.zeros(1, np.int64))[:, 0]

    @classmethod
    def leaf(cls, value: float, cover: float = 0.0) -> "Tree":
        return cls(np.array([-1]), np.array([-1]), np.array([-1]),
                   np.array([float(value)]), np.array([float(cover)]))

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node]), "cover": float(self.cover[node])}
        return {
            "feature": int(self.feature[node]),
            "value": float(self.value[node]),
            "cover": float(self.cover[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, doc: dict) -> "Tree":
        feature, left, right, value, cover = [], [], [], [], []

        def visit(d):
            i = len(feature)
            feature.append(-1)
            left.append(-1)
            right.append(-1)
            if "leaf" in d:
                value.append(float(d["leaf"]))
                cover.append(float(d["cover"]))
                return i
            value.append(float(d["value"]))
            cover.append(float(d["cover"]))
            feature[i] = int(d["feature"])
            left[i] = visit(d["left"])
            right[i] = visit(d["right"])
            return i

        visit(doc)
        return cls(np.array(feature, dtype=np.int64), np.array(left, dtype=np.int64),
                   np.array(right, dtype=np.int64), np.array(value, dtype=np.float64),
                   np.array(cover, dtype=np.float64))


def _pack(trees: list[Tree]):
    sizes = [t.n_nodes for t in trees]
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    feature = np.concatenate([t.feature for t in trees]).astype(np.int64)
    shift = np.repeat(offsets, sizes)
    left = np.concatenate([t.left for t in trees]).astype(np.int64)
    right = np.concatenate([t.right for t in trees]).astype(np.int64)
    internal = feature >= 0
    left[internal] += shift[internal]
    right[internal] += shift[internal]
    value = np.concatenate([t.value for t in trees]).astype(np.float64)
    return feature, left, right, value, offsets


@dataclass(eq=False)
class TreeEnsembleModel:
    """A trained forest or boosted ensemble bound to its training catalog.

    Forest leaves hold class-1 probabilities and the output is their mean.
    Boosted leaves hold log-odds increments added to ``base_score``.
    """

    kind: Kind
    trees: list[Tree]
    catalog: FeatureCatalog
    config: LearnerConfig
    base_score: float = 0.0
    _packed: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.trees:
            raise ConfigError("an ensemble needs at least one tree")
        self._packed = _pack(self.trees)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check(self, X) -> tuple[np.ndarray, bool]:
        X = np.asarray(X)
        single = X.ndim == 1
        X2 = np.ascontiguousarray(X[None, :] if single else X, dtype=np.uint8)
        if X2.ndim != 2 or X2.shape[1] != len(self.catalog):
            raise WidthMismatch(f"expected {len(self.catalog)} features, got {X2.shape[-1]}")
        return X2, single

    def tree_outputs(self, X) -> np.ndarray:
        """Leaf value of every tree: array (n_rows, n_trees)."""
        X2, _ = self._check(X)
        feature, left, right, value, roots = self._packed
        return _kernels.predict_trees(X2, feature, left, right, value, roots)

    def decision_function(self, X):
        """Forest: mean leaf probability. GBDT: log-odds (pre-logistic) score."""
        X2, single = self._check(X)
        per_tree = self.tree_outputs(X2)
        if self.kind == "random_forest":
            out = per_tree.mean(axis=1)
        else:
            out = self.base_score + per_tree.sum(axis=1)
        return float(out[0]) if single else out

    def predict_proba(self, X):
        raw = self.decision_function(X)
        if self.kind == "random_forest":
            return raw
        return _expit(raw)

    def predict_label(self, X, threshold: float = 0.5):
        p = self.predict_proba(X)
        if np.ndim(p) == 0:
            return int(p >= threshold)
        return (p >= threshold).astype(np.uint8)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparams": self.config.to_dict(),
            "base_score": float(self.base_score),
            "catalog": list(self.catalog.names),
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeEnsembleModel":
        return cls(
            kind=doc["kind"],
            trees=[Tree.from_nested(t) for t in doc["trees"]],
            catalog=FeatureCatalog(doc["catalog"]),
            config=LearnerConfig.from_dict(doc["hyperparams"]),
            base_score=float(doc["base_score"]),
        )


def _expit(z):
    return 1.0 / (1.0 + np.exp(-z))


def _require_both_classes(data: BinaryDataset) -> None:
    n0, n1 = data.class_counts()
    if n0 == 0 or n1 == 0:
        raise SingleClassDataset(f"need both classes to train, got {n0} benign / {n1} malware")


def train_tree(
    data: BinaryDataset,
    config: LearnerConfig,
    *,
    weights: np.ndarray | None = None,
    gradients: np.ndarray | None = None,
    hessians: np.ndarray | None = None,
    seed: int = 0,
) -> Tree:
    """Grow one tree.

    Forest trees split on Gini impurity using per-row ``weights`` (bootstrap
    counts; ones by default) and store class-1 probabilities at the leaves.
    Boosted trees split on ``gradients``/``hessians`` and store Newton steps.
    """
    if data.n_rows < 1:
        raise ValueError("cannot grow a tree on zero rows")
    depth = -1 if config.max_depth is None else config.max_depth
    if config.kind == "random_forest":
        w = np.ones(data.n_rows) if weights is None else np.asarray(weights, dtype=np.float64)
        arrays = _kernels.grow_gini_tree(
            data.X, data.y.astype(np.float64), w, depth, float(config.min_samples_leaf),
            config.max_features(len(data.catalog)), np.uint64(seed),
        )
    else:
        if gradients is None or hessians is None:
            raise ValueError("boosted trees need gradients and hessians")
        arrays = _kernels.grow_newton_tree(
            data.X, np.asarray(gradients, dtype=np.float64), np.asarray(hessians, dtype=np.float64),
            depth, config.min_samples_leaf, config.learning_rate,
        )
    return Tree(*(a.copy() for a in arrays))


def train_random_forest(data: BinaryDataset, config: LearnerConfig) -> TreeEnsembleModel:
    """Bagged CART trees with per-split feature subsampling."""
    _require_both_classes(data)
    if config.kind != "random_forest":
        config = LearnerConfig.from_dict({**config.to_dict(), "kind": "random_forest"})
    n = data.n_rows

    def grow(t: int) -> Tree:
        draws = derive_rng(config.seed, "bootstrap", t).integers(0, n, n)
        counts = np.bincount(draws, minlength=n).astype(np.float64)
        return train_tree(data, config, weights=counts, seed=derive_seed(config.seed, "forest_tree", t))

    trees = ordered_map(grow, range(config.n_trees))
    return TreeEnsembleModel("random_forest", trees, data.catalog, config)


def train_gbdt(data: BinaryDataset, config: LearnerConfig) -> TreeEnsembleModel:
    """Logistic-loss boosting from the log-odds prior of the class-1 rate."""
    _require_both_classes(data)
    if config.kind != "gbdt":
        config = LearnerConfig.from_dict({**config.to_dict(), "kind": "gbdt"})
    y = data.y.astype(np.float64)
    p = y.mean()
    base = math.log(p / (1.0 - p))
    raw = np.full(data.n_rows, base)
    trees = []
    for _ in range(config.n_trees):
        prob = _expit(raw)
        tree = train_tree(data, config, gradients=prob - y, hessians=prob * (1.0 - prob))
        trees.append(tree)
        raw = raw + tree.predict(data.X)
    return TreeEnsembleModel("gbdt", trees, data.catalog, config, base_score=base)


def train(data: BinaryDataset, config: LearnerConfig) -> TreeEnsembleModel:
    if config.kind == "gbdt":
        return train_gbdt(data, config)
    return train_random_forest(data, config)


def predict_proba(model: TreeEnsembleModel, X):
    return model.predict_proba(X)


def predict_label(model: TreeEnsembleModel, X, threshold: float = 0.5):
    return model.predict_label(X, threshold)


def logistic_loss_curve(model: TreeEnsembleModel, data: BinaryDataset) -> np.ndarray:
    """Mean logistic loss of a boosted model after 0, 1, ..., n_trees rounds."""
    if model.kind != "gbdt":
        raise ValueError("loss curve is defined for boosted models only")
    raw = model.base_score + np.concatenate(
        [np.zeros((data.n_rows, 1)), np.cumsum(model.tree_outputs(data.X), axis=1)], axis=1
    )
    y = data.y.astype(np.float64)[:, None]
    # log(1 + e^z) - y z, computed stably
    return (np.logaddexp(0.0, raw) - y * raw).mean(axis=0)
