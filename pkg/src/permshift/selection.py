"""Pearson-correlation filter ranking and minimal top-k feature selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .data import BinaryDataset, FeatureCatalog, project
from .errors import LengthMismatch, SingleClassDataset, TooFewSamples
from .learners import LearnerConfig, train


class Correlation(NamedTuple):
    r: float
    degenerate: bool = False


def pearson_r(x: Sequence[float], y: Sequence[float]) -> Correlation:
    """Sample Pearson correlation, computed two-pass with compensated sums.

    A constant input has no defined correlation; it is reported as
    ``Correlation(0.0, degenerate=True)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"vectors of length {x.size} and {y.size}")
    n = x.size
    if n < 2:
        raise TooFewSamples("pearson_r needs at least 2 samples")
    dx = x - math.fsum(x) / n
    dy = y - math.fsum(y) / n
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        return Correlation(0.0, True)
    sxy = math.fsum(dx * dy)
    # sqrt(s*s) == s exactly, so r(x, x) is exactly 1
    r = sxy / math.sqrt(sxx * syy)
    return Correlation(min(1.0, max(-1.0, r)))


@dataclass(frozen=True)
class RankEntry:
    name: str
    r: float
    abs_r: float
    degenerate: bool = False


@dataclass(frozen=True)
class CorrelationRanking:
    entries: tuple[RankEntry, ...]
    n: int

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def top(self, k: int) -> list[str]:
        return self.names[:k]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "entries": [
                {"name": e.name, "r": e.r, "abs_r": e.abs_r, "degenerate": e.degenerate}
                for e in self.entries
            ],
        }


def rank_features(data: BinaryDataset) -> CorrelationRanking:
    """Rank every feature by |r| against the label, descending.

    Ties go to the lexicographically smaller name; constant features
    (|r| = 0, degenerate) come after everything else.
    """
    n0, n1 = data.class_counts()
    if n0 == 0 or n1 == 0:
        raise SingleClassDataset("ranking needs both classes")
    if data.n_rows < 2:
        raise TooFewSamples("ranking needs at least 2 rows")
    y = data.y.astype(np.float64)
    entries = []
    for j, name in enumerate(data.catalog.names):
        r, degenerate = pearson_r(data.X[:, j], y)
        entries.append(RankEntry(name, r, abs(r), degenerate))
    entries.sort(key=lambda e: (e.degenerate, -e.abs_r, e.name))
    return CorrelationRanking(tuple(entries), data.n_rows)


@dataclass
class SelectionResult:
    selected: FeatureCatalog
    k: int
    full_feature_accuracy: float
    achieved_accuracy: float
    trace: list[tuple[int, float]]
    threshold: float
    step: int
    ranking: CorrelationRanking | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        doc = {
            "k": self.k,
            "selected": list(self.selected.names),
            "full_feature_accuracy": self.full_feature_accuracy,
            "achieved_accuracy": self.achieved_accuracy,
            "threshold": self.threshold,
            "step": self.step,
            "trace": [{"k": k, "accuracy": a} for k, a in self.trace],
        }
        if self.ranking is not None:
            doc["ranking"] = [e.name for e in self.ranking.entries]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SelectionResult":
        """Inverse of ``to_dict``; the correlation values themselves are not restored."""
        return cls(
            selected=FeatureCatalog(doc["selected"]),
            k=doc["k"],
            full_feature_accuracy=doc["full_feature_accuracy"],
            achieved_accuracy=doc["achieved_accuracy"],
            trace=[(t["k"], t["accuracy"]) for t in doc["trace"]],
            threshold=doc["threshold"],
            step=doc["step"],
        )


def subset_catalog(catalog: FeatureCatalog, names: Sequence[str]) -> FeatureCatalog:
    """The named features, kept in ``catalog`` order."""
    wanted = set(names)
    return FeatureCatalog(n for n in catalog.names if n in wanted)


def holdout_accuracy(train_set: BinaryDataset, holdout: BinaryDataset, config: LearnerConfig) -> float:
    model = train(train_set, config)
    return float(np.mean(model.predict_label(holdout.X) == holdout.y))


def select_minimal_topk(
    train_set: BinaryDataset,
    holdout: BinaryDataset,
    trainer: LearnerConfig,
    threshold: float = 1.0,
    step: int = 1,
) -> SelectionResult:
    """Smallest top-|r| prefix whose holdout accuracy reaches ``threshold`` x full accuracy.

    Features are ranked on ``train_set`` only. Candidate sizes are ``step``,
    ``2*step``, ... and always the full catalog; the search stops at the first
    qualifying size. The selected catalog keeps the original column order, so
    the full-size candidate is the full-feature model itself.
    """
    if train_set.catalog.names != holdout.catalog.names:
        raise ValueError("train and holdout must share one catalog")
    if step < 1:
        raise ValueError("step must be a positive integer")
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    total = len(train_set.catalog)
    full_acc = holdout_accuracy(train_set, holdout, trainer)
    ranking = rank_features(train_set)
    target = threshold * full_acc

    trace: list[tuple[int, float]] = []
    ks = list(range(step, total, step)) + [total]
    for k in ks:
        if k == total:
            acc = full_acc
        else:
            cat = subset_catalog(train_set.catalog, ranking.top(k))
            acc = holdout_accuracy(project(train_set, cat), project(holdout, cat), trainer)
        trace.append((k, acc))
        if acc >= target:
            return SelectionResult(
                selected=subset_catalog(train_set.catalog, ranking.top(k)),
                k=k,
                full_feature_accuracy=full_acc,
                achieved_accuracy=acc,
                trace=trace,
                threshold=threshold,
                step=step,
                ranking=ranking,
            )
    raise AssertionError("unreachable: the full catalog always qualifies")
