"""End-to-end experiment runs: intra-domain, cross-domain, hybrid, explanations.

Every random choice is derived from ``ExperimentConfig.seed``, so a run is a
pure function of its configuration. Intermediate artifacts (selections and
models) are persisted together with a fingerprint of the configuration and
reused by later commands when the fingerprint matches.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import jsonio
from .attribution import (
    BackgroundSet,
    ImportanceShift,
    global_importance,
    shap_tree_batch,
    waterfall,
    ShapAttribution,
    explanation_space,
)
from .data import (
    BinaryDataset,
    SplitPair,
    align_to_catalog,
    catalog_intersection,
    load_csv,
    merge_common,
    project,
    stratified_kfold,
    stratified_split,
    write_csv,
)
from .errors import ArchetypeUnavailable, ConfigError, EmptyIntersection, InvariantViolation
from .learners import KINDS, LearnerConfig, TreeEnsembleModel, train
from .metrics import EvalReport, aggregate, confusion, evaluate_scores
from .seeding import derive_seed
from .selection import SelectionResult, select_minimal_topk
from .synth import ShiftSpec, default_spec, generate_domain_pair

DEFAULT_SEED = 20240917
REGIME_NAMES = ("intra", "cross_a_to_b", "cross_b_to_a", "hybrid")
ARCHETYPES = ("TP", "TN", "FP", "FN")


@dataclass(frozen=True)
class SelectionSettings:
    """``domains=None`` selects on the first (feature-rich) domain only."""

    enabled: bool = True
    threshold: float = 1.0
    step: int = 1
    holdout: str = "test"
    holdout_fraction: float = 0.2
    domains: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.holdout not in ("test", "inner"):
            raise ConfigError("selection.holdout must be 'test' or 'inner'")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("selection.threshold must be in (0, 1]")
        if self.step < 1:
            raise ConfigError("selection.step must be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("selection.holdout_fraction must be in (0, 1)")


@dataclass(frozen=True)
class ExplainSettings:
    global_learner: str = "random_forest"
    local_learner: str = "gbdt"
    top_n: int = 15
    waterfall_top: int = 10
    instances: tuple[int, ...] = ()

    def __post_init__(self):
        for kind in (self.global_learner, self.local_learner):
            if kind not in KINDS:
                raise ConfigError(f"unknown learner kind {kind!r} in explain settings")
        if self.top_n < 1 or self.waterfall_top < 1:
            raise ConfigError("explain.top_n and explain.waterfall_top must be >= 1")


def _default_learners() -> tuple[LearnerConfig, ...]:
    return (LearnerConfig.default("random_forest"), LearnerConfig.default("gbdt"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on.

    Data comes from ``datasets`` (two CSV paths) or, when absent, from the
    synthetic ``synth`` spec. Learner ``seed`` fields are ignored: every
    model seed is derived from ``seed``.
    """

    synth: ShiftSpec | None = None
    datasets: tuple[str, str] | None = None
    domain_names: tuple[str, str] = ("A", "B")
    label_column: str = "Result"
    learners: tuple[LearnerConfig, ...] = field(default_factory=_default_learners)
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    explain: ExplainSettings = field(default_factory=ExplainSettings)
    regimes: tuple[str, ...] = REGIME_NAMES
    test_fraction: float = 0.2
    cv_folds: int = 5
    background_size: int = 100
    eval_on_original_test: bool = False
    seed: int = DEFAULT_SEED
    out_dir: str = "runs/default"

    def __post_init__(self):
        if not self.regimes:
            raise ConfigError("at least one regime is required")
        bad = [r for r in self.regimes if r not in REGIME_NAMES]
        if bad:
            raise ConfigError(f"unknown regimes {bad}; choose from {list(REGIME_NAMES)}")
        if self.synth is not None and self.datasets is not None:
            raise ConfigError("give either a synth spec or dataset paths, not both")
        if self.datasets is not None and len(self.datasets) != 2:
            raise ConfigError("exactly two dataset paths are required")
        if len(self.domain_names) != 2 or self.domain_names[0] == self.domain_names[1]:
            raise ConfigError("two distinct domain names are required")
        if not self.learners:
            raise ConfigError("at least one learner is required")
        kinds = [c.kind for c in self.learners]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("learner kinds must be unique")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.background_size < 1:
            raise ConfigError("background_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.selection.domains is not None:
            unknown = set(self.selection.domains) - set(self.domain_names)
            if unknown:
                raise ConfigError(f"selection domains {sorted(unknown)} are not domain names")

    @property
    def shift_spec(self) -> ShiftSpec:
        return self.synth if self.synth is not None else default_spec()

    @property
    def selection_domains(self) -> tuple[str, ...]:
        if not self.selection.enabled:
            return ()
        return self.selection.domains if self.selection.domains is not None else self.domain_names[:1]

    def learner(self, kind: str) -> LearnerConfig:
        for c in self.learners:
            if c.kind == kind:
                return c
        raise ConfigError(f"learner {kind!r} is not configured")

    def check_files(self) -> None:
        if self.datasets is None:
            return
        missing = [p for p in self.datasets if not Path(p).is_file()]
        if missing:
            raise ConfigError(f"dataset files not found: {missing}")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        return {
            "synth": None if self.datasets is not None else self.shift_spec.to_dict(),
            "datasets": None if self.datasets is None else list(self.datasets),
            "domain_names": list(self.domain_names),
            "label_column": self.label_column,
            "learners": [{k: v for k, v in c.to_dict().items() if k != "seed"} for c in self.learners],
            "selection": {
                **dataclasses.asdict(self.selection),
                "domains": None if self.selection.domains is None else list(self.selection.domains),
            },
            "explain": {**dataclasses.asdict(self.explain), "instances": list(self.explain.instances)},
            "regimes": list(self.regimes),
            "test_fraction": self.test_fraction,
            "cv_folds": self.cv_folds,
            "background_size": self.background_size,
            "eval_on_original_test": self.eval_on_original_test,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if kw.get("synth") is not None:
                kw["synth"] = ShiftSpec.from_dict(kw["synth"])
            if kw.get("datasets") is not None:
                kw["datasets"] = tuple(kw["datasets"])
            if "domain_names" in kw:
                kw["domain_names"] = tuple(kw["domain_names"])
            if "learners" in kw:
                kw["learners"] = tuple(LearnerConfig.from_dict(c) for c in kw["learners"])
            if "selection" in kw:
                sel = dict(kw["selection"])
                if sel.get("domains") is not None:
                    sel["domains"] = tuple(sel["domains"])
                kw["selection"] = SelectionSettings(**sel)
            if "explain" in kw:
                ex = dict(kw["explain"])
                if "instances" in ex:
                    ex["instances"] = tuple(ex["instances"])
                kw["explain"] = ExplainSettings(**ex)
            if "regimes" in kw:
                kw["regimes"] = tuple(kw["regimes"])
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def fingerprint(self) -> str:
        """Hash of everything that affects results (the output directory does not)."""
        doc = self.to_dict()
        del doc["out_dir"]
        return hashlib.sha256(jsonio.dumps(doc, indent=None).encode()).hexdigest()


def _keys_digest(data: BinaryDataset) -> str:
    keys = sorted((str(t), i) for t, i in data.row_keys())
    return hashlib.sha256(json.dumps(keys).encode()).hexdigest()


def row_audit(train_set: BinaryDataset, test_set: BinaryDataset) -> dict[str, Any]:
    """Row-key overlap between training and evaluation rows; must be empty."""
    overlap = len(train_set.row_keys() & test_set.row_keys())
    if overlap:
        raise InvariantViolation(f"{overlap} evaluation rows were also used for training")
    return {
        "train_rows": train_set.n_rows,
        "test_rows": test_set.n_rows,
        "train_domains": train_set.domain_counts(),
        "test_domains": test_set.domain_counts(),
        "overlap": overlap,
        "train_keys_sha256": _keys_digest(train_set),
        "test_keys_sha256": _keys_digest(test_set),
    }


class Experiment:
    """Lazily computed, cached state of one configured run."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out = Path(config.out_dir)
        self.fingerprint = config.fingerprint()
        self._domains: dict[str, BinaryDataset] | None = None
        self._splits: dict[str, SplitPair] = {}
        self._selection: dict[tuple[str, str], SelectionResult | None] = {}
        self._models: dict[tuple[str, str], TreeEnsembleModel] = {}
        self.artifacts: list[Path] = []

    # data -----------------------------------------------------------------

    @property
    def names(self) -> tuple[str, str]:
        return self.config.domain_names

    def domain_index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def domains(self) -> dict[str, BinaryDataset]:
        if self._domains is None:
            cfg = self.config
            if cfg.datasets is not None:
                cfg.check_files()
                loaded = [load_csv(p, cfg.label_column) for p in cfg.datasets]
            else:
                spec = dataclasses.replace(cfg.shift_spec, domain_names=cfg.domain_names)
                loaded = list(generate_domain_pair(spec))
            self._domains = {n: d.with_domain(n) for n, d in zip(self.names, loaded)}
        return self._domains

    def split(self, name: str) -> SplitPair:
        if name not in self._splits:
            self._splits[name] = stratified_split(
                self.domains[name], self.config.test_fraction,
                derive_seed(self.config.seed, "split", self.domain_index(name)),
            )
        return self._splits[name]

    def learner(self, kind: str, purpose: str, index: int) -> LearnerConfig:
        return dataclasses.replace(self.config.learner(kind),
                                   seed=derive_seed(self.config.seed, f"{purpose}/{kind}", index))

    # persisted artifacts ---------------------------------------------------

    def _write(self, rel: str, doc: Any) -> Path:
        path = self.out / rel
        jsonio.write_json(path, doc)
        self.artifacts.append(path)
        return path

    def _write_text(self, rel: str, text: str) -> Path:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        jsonio.atomic_write_text(path, text)
        self.artifacts.append(path)
        return path

    def _load_if_current(self, rel: str) -> dict | None:
        path = self.out / rel
        if not path.is_file():
            return None
        doc = jsonio.read_json(path)
        if doc.get("fingerprint") != self.fingerprint:
            return None
        return doc

    # selection ---------------------------------------------------------------

    def selection(self, name: str, kind: str) -> SelectionResult | None:
        """Minimal top-k selection for one domain and learner (None when disabled)."""
        key = (name, kind)
        if key in self._selection:
            return self._selection[key]
        result = None
        if name in self.config.selection_domains:
            rel = f"selection/{name}__{kind}.json"
            doc = self._load_if_current(rel)
            if doc is not None:
                result = SelectionResult.from_dict(doc["selection"])
            else:
                result = self._run_selection(name, kind)
                self._write(rel, {"fingerprint": self.fingerprint, "domain": name,
                                  "learner": kind, "selection": result.to_dict()})
        self._selection[key] = result
        return result

    def _run_selection(self, name: str, kind: str) -> SelectionResult:
        s = self.config.selection
        sp = self.split(name)
        if s.holdout == "test":
            fit, holdout = sp.train, sp.test
        else:
            inner = stratified_split(sp.train, s.holdout_fraction,
                                     derive_seed(self.config.seed, "selection_holdout",
                                                 self.domain_index(name)))
            fit, holdout = inner.train, inner.test
        return select_minimal_topk(fit, holdout, self.learner(kind, "learner", self.domain_index(name)),
                                   threshold=s.threshold, step=s.step)

    def train_set(self, name: str, kind: str) -> BinaryDataset:
        """Training split of a domain, restricted to its selected features if any."""
        sel = self.selection(name, kind)
        data = self.split(name).train
        return data if sel is None else project(data, sel.selected)

    # models --------------------------------------------------------------------

    def intra_model(self, name: str, kind: str) -> TreeEnsembleModel:
        key = (name, kind)
        if key not in self._models:
            rel = f"models/intra__{name}__{kind}.json"
            doc = self._load_if_current(rel)
            if doc is not None:
                model = TreeEnsembleModel.from_dict(doc["model"])
            else:
                model = train(self.train_set(name, kind), self.learner(kind, "learner", self.domain_index(name)))
                self._write(rel, {"fingerprint": self.fingerprint, "domain": name,
                                  "learner": kind, "model": model.to_dict()})
            self._models[key] = model
        return self._models[key]

    def kinds(self) -> list[str]:
        return [c.kind for c in self.config.learners]


def _evaluate(model: TreeEnsembleModel, test_set: BinaryDataset, **tags) -> EvalReport:
    data = align_to_catalog(test_set, model.catalog)
    return evaluate_scores(model.predict_proba(data.X), data.y, model_kind=model.kind,
                           k_features=len(model.catalog), **tags)


def run_intra(exp: Experiment) -> dict[str, dict]:
    """Train on each domain's 80% split, score its 20% split; one document per learner."""
    docs = {}
    for kind in exp.kinds():
        reports, selections = [], {}
        for name in exp.names:
            model = exp.intra_model(name, kind)
            rep = _evaluate(model, exp.split(name).test, regime="intra",
                            train_domain=name, test_domain=name)
            rep.audit = row_audit(exp.train_set(name, kind), exp.split(name).test)
            reports.append(rep)
            sel = exp.selection(name, kind)
            if sel is not None:
                selections[name] = {
                    "k": sel.k,
                    "n_features": len(exp.domains[name].catalog),
                    "full_feature_accuracy": sel.full_feature_accuracy,
                    "reduced_feature_accuracy": rep.accuracy,
                    "holdout": exp.config.selection.holdout,
                }
        docs[kind] = {"regime": "intra", "learner": kind, "reports": [r.to_dict() for r in reports],
                      "selection": selections}
    return docs


def _directions(exp: Experiment, requested=None) -> list[tuple[str, str]]:
    a, b = exp.names
    table = {"cross_a_to_b": (a, b), "cross_b_to_a": (b, a)}
    keys = requested if requested is not None else [r for r in exp.config.regimes if r in table]
    return [table[k] for k in keys]


def run_cross(exp: Experiment, directions: list[str] | None = None) -> dict[str, dict]:
    """Score each source domain's intra model on the other domain's test split.

    The target rows are aligned to the model's catalog: shared features are
    kept, missing ones are zero-filled and extra ones dropped.
    """
    docs = {}
    pairs = _directions(exp, directions)
    if not pairs:
        raise ConfigError("no cross-domain direction requested")
    for kind in exp.kinds():
        reports = []
        for src, dst in pairs:
            model = exp.intra_model(src, kind)
            target = exp.split(dst).test
            rep = _evaluate(model, target, regime="cross", train_domain=src, test_domain=dst)
            rep.audit = row_audit(exp.train_set(src, kind), target)
            rep.audit["features_shared"] = int(sum(n in target.catalog for n in model.catalog.names))
            rep.audit["features_zero_filled"] = len(model.catalog) - rep.audit["features_shared"]
            reports.append(rep)
        docs[kind] = {"regime": "cross", "learner": kind, "reports": [r.to_dict() for r in reports]}
    return docs


def run_hybrid(exp: Experiment, eval_on_original_test: bool | None = None) -> dict[str, dict]:
    """Merge both training splits on their common features and cross-validate.

    Each fold's model is scored separately on the held-out rows of each
    domain; metrics are summarised as mean and sample standard deviation.
    With ``eval_on_original_test`` the fold models are also scored on the
    original 20% test splits.
    """
    cfg = exp.config
    if eval_on_original_test is None:
        eval_on_original_test = cfg.eval_on_original_test
    a, b = exp.names
    train_a, train_b = exp.split(a).train, exp.split(b).train
    common = catalog_intersection(train_a.catalog, train_b.catalog)
    if len(common) == 0:
        raise EmptyIntersection("the two domains share no features")
    merged = merge_common(train_a, train_b, derive_seed(cfg.seed, "hybrid_merge"))
    folds = stratified_kfold(merged, cfg.cv_folds, derive_seed(cfg.seed, "hybrid_folds"))
    originals = {n: project(exp.split(n).test, merged.catalog) for n in exp.names}

    docs = {}
    for kind in exp.kinds():
        fold_reports: dict[str, list[EvalReport]] = {n: [] for n in exp.names}
        orig_reports: dict[str, list[EvalReport]] = {n: [] for n in exp.names}
        for i in range(len(folds)):
            tr, held_idx = folds.split(i)
            fit = merged.take(tr)
            held = merged.take(held_idx)
            model = train(fit, exp.learner(kind, "hybrid", i))
            for name in exp.names:
                part = held.take(np.flatnonzero(held.tags == name))
                rep = _evaluate(model, part, regime="hybrid", train_domain="+".join(exp.names),
                                test_domain=name)
                rep.audit = {"fold": i, "evaluation": "cv_fold", **row_audit(fit, part)}
                fold_reports[name].append(rep)
                if eval_on_original_test:
                    rep = _evaluate(model, originals[name], regime="hybrid",
                                    train_domain="+".join(exp.names), test_domain=name)
                    rep.audit = {"fold": i, "evaluation": "original_test",
                                 **row_audit(fit, originals[name])}
                    orig_reports[name].append(rep)
        doc = {
            "regime": "hybrid",
            "learner": kind,
            "common_features": len(merged.catalog),
            "folds": len(folds),
            "reports": [r.to_dict() for n in exp.names for r in fold_reports[n]],
            "summary": {n: aggregate(fold_reports[n]) for n in exp.names},
        }
        if eval_on_original_test:
            doc["original_test"] = {
                "reports": [r.to_dict() for n in exp.names for r in orig_reports[n]],
                "summary": {n: aggregate(orig_reports[n]) for n in exp.names},
            }
        docs[kind] = doc
    return docs


def pick_archetypes(probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> dict[str, int | None]:
    """One test row per confusion cell: the most confident prediction in it.

    TP/FP take the highest malware probability, TN/FN the lowest; ties go to
    the lower row. An empty cell maps to None.
    """
    pred = probs >= threshold
    y = labels.astype(bool)
    cells = {"TP": pred & y, "TN": ~pred & ~y, "FP": pred & ~y, "FN": ~pred & y}
    out: dict[str, int | None] = {}
    for name in ARCHETYPES:
        idx = np.flatnonzero(cells[name])
        if idx.size == 0:
            out[name] = None
            continue
        key = -probs[idx] if name in ("TP", "FP") else probs[idx]
        out[name] = int(idx[np.argsort(key, kind="stable")[0]])
    return out


def archetype_row(archetypes: dict[str, int | None], name: str) -> int:
    row = archetypes[name]
    if row is None:
        raise ArchetypeUnavailable(f"no {name} instance in the confusion matrix")
    return row


def explain_global(exp: Experiment, name: str, kind: str) -> dict[str, Path]:
    """Violin data on a domain's own test split and, if another domain exists,
    the importance shift of the same model on that domain's test split."""
    cfg = exp.config
    model = exp.intra_model(name, kind)
    bg = BackgroundSet.sample(exp.train_set(name, kind), cfg.background_size,
                              derive_seed(cfg.seed, "background", exp.domain_index(name)))
    intra = global_importance(model, exp.split(name).test, bg, top_n=cfg.explain.top_n)
    paths = {
        "violin": exp._write_text(f"explain/violin__{name}__{kind}.csv", intra.violin_csv()),
        "importance": exp._write(f"explain/importance__{name}__{kind}.json",
                                 {"domain": name, "learner": kind, "background_rows": bg.size,
                                  "space": explanation_space(model), **intra.to_dict()}),
    }
    other = [n for n in exp.names if n != name][0]
    cross = global_importance(model, exp.split(other).test, bg, top_n=cfg.explain.top_n)
    shift = ImportanceShift(model.catalog.names, intra.mean_abs, cross.mean_abs)
    paths["shift"] = exp._write_text(f"explain/shift__{name}_to_{other}__{kind}.csv", shift.to_csv())
    return paths


def explain_local(exp: Experiment, name: str, kind: str) -> dict:
    """Waterfalls for the four confusion archetypes plus any requested test rows."""
    cfg = exp.config
    model = exp.intra_model(name, kind)
    test = align_to_catalog(exp.split(name).test, model.catalog)
    probs = model.predict_proba(test.X)
    arch = pick_archetypes(probs, test.y)
    rows = {a: r for a, r in arch.items() if r is not None}
    for r in cfg.explain.instances:
        if not 0 <= r < test.n_rows:
            raise ConfigError(f"explain instance {r} outside the test split (n={test.n_rows})")
        rows[f"row_{r}"] = r
    bg = BackgroundSet.sample(exp.train_set(name, kind), cfg.background_size,
                              derive_seed(cfg.seed, "background", exp.domain_index(name)))
    order = list(rows)
    idx = np.array([rows[k] for k in order], dtype=np.int64)
    entries: dict[str, Any] = {}
    if len(idx):
        phi, base, fx = shap_tree_batch(model, test.X[idx], bg)
        base_p = float(np.mean(model.predict_proba(bg.X)))
        for j, label in enumerate(order):
            r = int(idx[j])
            att = ShapAttribution(phi[j], base, float(fx[j]), model.catalog.names,
                                  explanation_space(model), instance_id=int(test.row_index[r]),
                                  model_id=f"intra__{name}__{kind}")
            if att.space == "log_odds":
                att.base_probability = base_p
                att.fx_probability = float(probs[r])
            entries[label] = {
                "test_row": r,
                "label": int(test.y[r]),
                "probability": float(probs[r]),
                "attribution": att.to_dict(),
                "waterfall": waterfall(att, cfg.explain.waterfall_top).to_dict(),
            }
    for a in ARCHETYPES:
        if arch[a] is None:
            entries[a] = {"unavailable": str(ArchetypeUnavailable(f"no {a} instance in the confusion matrix"))}
    cm = confusion(probs >= 0.5, test.y)
    doc = {"domain": name, "learner": kind, "confusion": dataclasses.asdict(cm),
           "instances": {k: entries[k] for k in list(ARCHETYPES) + [k for k in order if k not in ARCHETYPES]}}
    exp._write(f"explain/waterfalls__{name}__{kind}.json", doc)
    return doc


def run_explain(exp: Experiment, domains: list[str] | None = None) -> None:
    """Global summaries with the configured global learner on every domain;
    waterfalls with the local learner on the first domain."""
    cfg = exp.config
    kinds = exp.kinds()
    g = cfg.explain.global_learner if cfg.explain.global_learner in kinds else kinds[0]
    loc = cfg.explain.local_learner if cfg.explain.local_learner in kinds else kinds[0]
    for name in domains or exp.names:
        explain_global(exp, name, g)
    explain_local(exp, (domains or exp.names)[0], loc)


def emit_report(exp: Experiment, regime: str, docs: dict[str, dict]) -> list[Path]:
    """One ``reports/{regime}__{learner}.json`` per learner."""
    return [exp._write(f"reports/{regime}__{kind}.json", doc) for kind, doc in docs.items()]


def write_index(exp: Experiment, run_info: dict[str, Any]) -> Path:
    """List every artifact under the output directory.

    Wall-clock data (timestamps, timings, thread count) lives under the
    single ``run`` key so the rest of the run stays byte-reproducible.
    """
    files = sorted(
        p.relative_to(exp.out).as_posix() for p in exp.out.rglob("*")
        if p.is_file() and p.name != "index.json" and not p.name.startswith(".")
    )
    doc = {
        "run": run_info,
        "config_fingerprint": exp.fingerprint,
        "seed": exp.config.seed,
        "artifacts": files,
    }
    path = exp.out / "index.json"
    jsonio.write_json(path, doc)
    return path


def write_config(exp: Experiment) -> Path:
    """The resolved configuration, minus the output directory so reruns elsewhere match."""
    doc = exp.config.to_dict()
    del doc["out_dir"]
    return exp._write("config.json", doc)


def export_synth(exp: Experiment) -> list[Path]:
    """Write both synthetic domains as CSV plus the spec that produced them."""
    if exp.config.datasets is not None:
        raise ConfigError("gen-synth needs a synthetic configuration, not dataset paths")
    paths = []
    for name, data in exp.domains.items():
        path = exp.out / "data" / f"{name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(data, path, exp.config.label_column)
        exp.artifacts.append(path)
        paths.append(path)
    paths.append(exp._write("data/spec.json", exp.config.shift_spec.to_dict()))
    return paths
