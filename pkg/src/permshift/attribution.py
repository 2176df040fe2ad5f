"""Interventional Shapley attributions for tree ensembles.

The value of a coalition ``S`` for instance ``x`` is the model output on a
composite row taking ``x``'s values on ``S`` and a background row's values
elsewhere, averaged over the background set. ``shap_exact`` enumerates every
coalition; ``shap_tree`` computes the same numbers in polynomial time by
walking each tree once per instance.

Forest attributions are in probability space. Boosted attributions are in
log-odds space, where per-tree contributions add up exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from . import _kernels
from .data import BinaryDataset, align_to_catalog
from .errors import TooManyFeaturesForExact, WidthMismatch
from .learners import TreeEnsembleModel, _expit
from .seeding import derive_rng

Output = Literal["probability", "log_odds"]
MAX_EXACT_FEATURES = 20


@dataclass(frozen=True, eq=False)
class BackgroundSet:
    """Rows standing in for "feature unknown"; labels are ignored."""

    rows: BinaryDataset
    sampling_seed: int | None = None

    def __post_init__(self):
        if self.rows.n_rows == 0:
            raise ValueError("background set must not be empty")

    @property
    def size(self) -> int:
        return self.rows.n_rows

    @property
    def X(self) -> np.ndarray:
        return self.rows.X

    @classmethod
    def sample(cls, data: BinaryDataset, size: int = 100, seed: int = 0) -> "BackgroundSet":
        """``size`` distinct rows of ``data`` (all rows if it has fewer)."""
        if size >= data.n_rows:
            return cls(data, seed)
        idx = np.sort(derive_rng(seed, "background").choice(data.n_rows, size, replace=False))
        return cls(data.take(idx), seed)


def _check_background(model: TreeEnsembleModel, background: BackgroundSet) -> np.ndarray:
    if background.rows.catalog.names != model.catalog.names:
        raise WidthMismatch("background catalog differs from the model catalog")
    return background.X


def _instance(model: TreeEnsembleModel, instance) -> np.ndarray:
    x = np.asarray(instance, dtype=np.uint8)
    if x.shape != (len(model.catalog),):
        raise WidthMismatch(f"instance has {x.shape} entries, model expects {len(model.catalog)}")
    return x


def explanation_space(model: TreeEnsembleModel) -> Output:
    return "probability" if model.kind == "random_forest" else "log_odds"


def _model_output(model: TreeEnsembleModel, X: np.ndarray, output: Output) -> np.ndarray:
    raw = model.decision_function(X)
    if output == "probability" and model.kind == "gbdt":
        return _expit(raw)
    if output == "log_odds" and model.kind == "random_forest":
        raise ValueError("forest outputs are probabilities; log-odds space is for boosted models")
    return raw


@dataclass
class ShapAttribution:
    """Per-feature contributions with ``base_value + sum(phi) == fx``."""

    phi: np.ndarray
    base_value: float
    fx: float
    feature_names: tuple[str, ...]
    space: Output
    instance_id: str | int | None = None
    model_id: str | None = None
    base_probability: float | None = None
    fx_probability: float | None = None

    def additivity_error(self) -> float:
        return abs(self.base_value + math.fsum(self.phi) - self.fx)

    def to_dict(self) -> dict:
        doc = {
            "instance_id": self.instance_id,
            "model_id": self.model_id,
            "space": self.space,
            "base_value": self.base_value,
            "fx": self.fx,
            "phi": {n: float(v) for n, v in zip(self.feature_names, self.phi)},
        }
        if self.base_probability is not None:
            doc["base_probability"] = self.base_probability
            doc["fx_probability"] = self.fx_probability
        return doc


def coalition_value(
    model: TreeEnsembleModel,
    instance,
    S: Iterable[int] | np.ndarray,
    background: BackgroundSet,
    output: Output = "probability",
) -> float:
    """Mean model output over background rows with features in ``S`` set from ``instance``."""
    x = _instance(model, instance)
    Z = _check_background(model, background)
    mask = np.zeros(len(x), dtype=bool)
    S = np.asarray(list(S) if not isinstance(S, np.ndarray) else S)
    if S.dtype == bool:
        mask[:] = S
    elif S.size:
        mask[S.astype(np.int64)] = True
    composite = np.where(mask[None, :], x[None, :], Z)
    return float(np.mean(_model_output(model, composite, output)))


def _coalition_table(model, x, Z, output) -> np.ndarray:
    """v[mask] for every coalition bitmask, bit j meaning feature j is in S."""
    F = len(x)
    masks = np.arange(1 << F, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(F)) & 1).astype(bool)
    nb = Z.shape[0]
    v = np.empty(1 << F)
    chunk = max(1, 2**16 // nb)
    for lo in range(0, 1 << F, chunk):
        b = bits[lo:lo + chunk]
        composite = np.where(b[:, None, :], x[None, None, :], Z[None, :, :]).reshape(-1, F)
        v[lo:lo + chunk] = _model_output(model, composite, output).reshape(len(b), nb).mean(axis=1)
    return v


def shap_exact(
    model: TreeEnsembleModel,
    instance,
    background: BackgroundSet,
    output: Output | None = None,
) -> ShapAttribution:
    """Shapley values by summing over every coalition (exponential; |F| <= 20)."""
    x = _instance(model, instance)
    Z = _check_background(model, background)
    F = len(x)
    if F > MAX_EXACT_FEATURES:
        raise TooManyFeaturesForExact(f"{F} features; exact enumeration allows {MAX_EXACT_FEATURES}")
    output = output or explanation_space(model)
    v = _coalition_table(model, x, Z, output)
    masks = np.arange(1 << F, dtype=np.int64)
    sizes = np.array([bin(m).count("1") for m in range(1 << F)])
    weight = np.array(
        [math.factorial(s) * math.factorial(F - s - 1) / math.factorial(F) for s in range(F)]
    )
    phi = np.empty(F)
    for i in range(F):
        without = masks[(masks >> i) & 1 == 0]
        phi[i] = math.fsum(weight[sizes[without]] * (v[without | (1 << i)] - v[without]))
    return _finish(model, x, Z, phi, float(v[0]), float(v[-1]), output)


def _finish(model, x, Z, phi, base, fx, output, instance_id=None, model_id=None) -> ShapAttribution:
    att = ShapAttribution(phi, base, fx, model.catalog.names, output, instance_id, model_id)
    if output == "log_odds":
        att.base_probability = float(np.mean(model.predict_proba(Z)))
        att.fx_probability = float(model.predict_proba(x))
    return att


def shap_tree_batch(model: TreeEnsembleModel, X: np.ndarray, background: BackgroundSet):
    """Attributions for every row of ``X``: (phi matrix, base value, fx vector).

    Values are in the model's explanation space; forest trees are weighted
    by 1/n_trees, boosted trees by 1.
    """
    Z = np.ascontiguousarray(_check_background(model, background))
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.uint8)))
    if X.shape[1] != len(model.catalog):
        raise WidthMismatch(f"expected {len(model.catalog)} features, got {X.shape[1]}")
    feature, left, right, value, roots = model._packed
    scale = 1.0 / model.n_trees if model.kind == "random_forest" else 1.0
    max_path = int(_kernels.max_path_length(left, right, feature, roots))
    if max_path <= _kernels.MASK_BITS:
        leaf_value, off, pf, pv = _kernels.leaf_paths(feature, left, right, value, roots)
        moff, masks, counts = _kernels.leaf_background_masks(off, pf, pv, Z)
        phi = _kernels.tree_shap_leaves(X, Z.shape[0], leaf_value, off, pf, pv, moff, masks,
                                        counts, scale, max_path, X.shape[1])
    else:
        phi = _kernels.tree_shap_batch(X, Z, feature, left, right, value, roots, scale, max_path)
    base = float(np.mean(model.decision_function(Z)))
    fx = np.asarray(model.decision_function(X), dtype=np.float64)
    return phi, base, fx


def shap_tree(
    model: TreeEnsembleModel,
    instance,
    background: BackgroundSet,
    instance_id: str | int | None = None,
    model_id: str | None = None,
) -> ShapAttribution:
    x = _instance(model, instance)
    phi, base, fx = shap_tree_batch(model, x[None, :], background)
    return _finish(model, x, background.X, phi[0], base, float(fx[0]),
                   explanation_space(model), instance_id, model_id)


def _rank_by(values: np.ndarray, names: Sequence[str]) -> list[int]:
    return sorted(range(len(names)), key=lambda j: (-values[j], names[j]))


@dataclass
class GlobalImportance:
    feature_names: tuple[str, ...]
    mean_abs: np.ndarray
    phi: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    base_value: float = 0.0
    top_n: int = 15

    def ranking(self) -> list[str]:
        return [self.feature_names[j] for j in _rank_by(self.mean_abs, self.feature_names)]

    def top(self, n: int | None = None) -> list[str]:
        return self.ranking()[: n or self.top_n]

    def points(self, n: int | None = None) -> list[tuple[str, int, float]]:
        """(feature, feature value, phi) for every explained row and top feature."""
        out = []
        for name in self.top(n):
            j = self.feature_names.index(name)
            out += [(name, int(v), float(p)) for v, p in zip(self.values[:, j], self.phi[:, j])]
        return out

    def violin_csv(self, n: int | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "value", "phi"])
        for name, v, p in self.points(n):
            w.writerow([name, v, f"{p:.17g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "n_explained": int(self.phi.shape[0]),
            "mean_abs": {self.feature_names[j]: float(self.mean_abs[j])
                         for j in _rank_by(self.mean_abs, self.feature_names)},
        }


def global_importance(
    model: TreeEnsembleModel,
    test_set: BinaryDataset,
    background: BackgroundSet,
    top_n: int = 15,
) -> GlobalImportance:
    """Explain every row of ``test_set``; rank features by mean |phi|."""
    if test_set.n_rows == 0:
        raise ValueError("nothing to explain")
    data = align_to_catalog(test_set, model.catalog)
    phi, base, _ = shap_tree_batch(model, data.X, background)
    return GlobalImportance(model.catalog.names, np.abs(phi).mean(axis=0), phi, data.X, base, top_n)


@dataclass
class ImportanceShift:
    """Mean |phi| of one model on its own domain and on another domain."""

    feature_names: tuple[str, ...]
    intra_mean_abs: np.ndarray
    cross_mean_abs: np.ndarray

    def table(self) -> list[tuple[str, float, float]]:
        """Rows sorted by the larger of the two importances, descending."""
        peak = np.maximum(self.intra_mean_abs, self.cross_mean_abs)
        return [(self.feature_names[j], float(self.intra_mean_abs[j]), float(self.cross_mean_abs[j]))
                for j in _rank_by(peak, self.feature_names)]

    def top(self, n: int = 15) -> list[tuple[str, float, float]]:
        return self.table()[:n]

    def largest_shifts(self, n: int = 15) -> list[tuple[str, float, float]]:
        delta = np.abs(self.intra_mean_abs - self.cross_mean_abs)
        return [(self.feature_names[j], float(self.intra_mean_abs[j]), float(self.cross_mean_abs[j]))
                for j in _rank_by(delta, self.feature_names)[:n]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "intra_mean_abs", "cross_mean_abs"])
        for name, a, b in self.table():
            w.writerow([name, f"{a:.17g}", f"{b:.17g}"])
        return buf.getvalue()


def importance_shift(
    model: TreeEnsembleModel,
    intra_test: BinaryDataset,
    cross_test: BinaryDataset,
    background: BackgroundSet,
) -> ImportanceShift:
    intra = global_importance(model, intra_test, background)
    cross = global_importance(model, cross_test, background)
    return ImportanceShift(model.catalog.names, intra.mean_abs, cross.mean_abs)


@dataclass
class Waterfall:
    base_value: float
    fx: float
    steps: list[dict]

    def to_dict(self) -> dict:
        return {"base_value": self.base_value, "fx": self.fx, "steps": self.steps}


def waterfall(attribution: ShapAttribution, top_n: int = 10) -> Waterfall:
    """Largest |phi| first; the rest collapse into one ``rest`` step.

    Each step records the running total before and after it, starting at the
    base value and ending at ``fx``. Features with zero contribution are
    omitted.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    phi = attribution.phi
    names = attribution.feature_names
    nonzero = [j for j in _rank_by(np.abs(phi), names) if phi[j] != 0.0]
    shown, rest = nonzero[:top_n], nonzero[top_n:]
    steps = []
    parts = [attribution.base_value]
    for j in shown:
        start = math.fsum(parts)
        parts.append(float(phi[j]))
        steps.append({"feature": names[j], "phi": float(phi[j]), "start": start, "end": math.fsum(parts)})
    if rest:
        start = math.fsum(parts)
        parts += [float(phi[j]) for j in rest]
        steps.append({"feature": f"{len(rest)} other features", "phi": math.fsum(float(phi[j]) for j in rest),
                      "start": start, "end": math.fsum(parts), "collapsed": len(rest)})
    return Waterfall(attribution.base_value, attribution.fx, steps)
