"""Confusion counts, per-class precision/recall/F1, accuracy and ROC AUC."""

from __future__ import annotations

import statistics
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any, Sequence

import numpy as np

from .errors import LengthMismatch, SingleClassLabels

REGIMES = ("intra", "cross", "hybrid")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with malware (class 1) as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


def confusion(preds: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    preds = np.asarray(preds).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if preds.shape != labels.shape:
        raise LengthMismatch(f"{len(preds)} predictions for {len(labels)} labels")
    if preds.size == 0:
        raise LengthMismatch("nothing to score")
    return ConfusionMatrix(
        tp=int(np.sum(preds & labels)),
        fp=int(np.sum(preds & ~labels)),
        tn=int(np.sum(~preds & ~labels)),
        fn=int(np.sum(~preds & labels)),
    )


def _ratio(num: int, den: int, name: str, degenerate: list[str]) -> float:
    if den == 0:
        degenerate.append(name)
        return 0.0
    return num / den


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)


def classification_report(cm: ConfusionMatrix) -> dict[str, Any]:
    """Per-class metrics and accuracy.

    A 0/0 precision or recall is reported as 0.0 and named in ``degenerate``.
    """
    degenerate: list[str] = []
    mal_p = _ratio(cm.tp, cm.tp + cm.fp, "malware_precision", degenerate)
    mal_r = _ratio(cm.tp, cm.tp + cm.fn, "malware_recall", degenerate)
    ben_p = _ratio(cm.tn, cm.tn + cm.fn, "benign_precision", degenerate)
    ben_r = _ratio(cm.tn, cm.tn + cm.fp, "benign_recall", degenerate)
    return {
        "benign": ClassMetrics(ben_p, ben_r, _f1(ben_p, ben_r)),
        "malware": ClassMetrics(mal_p, mal_r, _f1(mal_p, mal_r)),
        "accuracy": (cm.tp + cm.tn) / cm.total,
        "degenerate": degenerate,
    }


def auc_counts(scores: Sequence[float], labels: Sequence[int]) -> tuple[int, int]:
    """Twice the Mann-Whitney U of the positives, and twice n_pos * n_neg.

    Tied scores share the average of their ranks. Both numbers are exact
    integers, so their ratio is the AUC as a rational.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{len(scores)} scores for {len(labels)} labels")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("AUC needs both classes")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    pos = labels[order]
    # tie groups [start, end): doubled average rank is start + end + 1 (1-based ranks)
    boundaries = np.flatnonzero(np.diff(s)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(s)]])
    pos_per_group = np.add.reduceat(pos.astype(np.int64), starts)
    rank2_sum = int(np.sum(pos_per_group * (starts + ends + 1)))
    u2 = rank2_sum - n_pos * (n_pos + 1)
    return u2, 2 * n_pos * n_neg


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """AUC = (sum of positive ranks - n+(n+ + 1)/2) / (n+ n-), average ranks for ties."""
    u2, denom = auc_counts(scores, labels)
    return u2 / denom


@dataclass
class EvalReport:
    regime: str
    train_domain: str
    test_domain: str
    model_kind: str
    k_features: int
    accuracy: float
    auc: float | None
    confusion: ConfusionMatrix
    benign: ClassMetrics
    malware: ClassMetrics
    n_rows: int
    degenerate: list[str] = field(default_factory=list)
    audit: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime,
            "train_domain": self.train_domain,
            "test_domain": self.test_domain,
            "model_kind": self.model_kind,
            "k_features": self.k_features,
            "n_rows": self.n_rows,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "confusion": asdict(self.confusion),
            "benign": asdict(self.benign),
            "malware": asdict(self.malware),
            "degenerate": list(self.degenerate),
            "audit": self.audit,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalReport":
        return cls(
            regime=d["regime"],
            train_domain=d["train_domain"],
            test_domain=d["test_domain"],
            model_kind=d["model_kind"],
            k_features=d["k_features"],
            accuracy=d["accuracy"],
            auc=d["auc"],
            confusion=ConfusionMatrix(**d["confusion"]),
            benign=ClassMetrics(**d["benign"]),
            malware=ClassMetrics(**d["malware"]),
            n_rows=d["n_rows"],
            degenerate=list(d.get("degenerate", [])),
            audit=dict(d.get("audit", {})),
        )


def evaluate_scores(
    scores: np.ndarray,
    labels: np.ndarray,
    *,
    regime: str,
    train_domain: str,
    test_domain: str,
    model_kind: str,
    k_features: int,
    threshold: float = 0.5,
) -> EvalReport:
    """Build an EvalReport from predicted class-1 probabilities."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    scores = np.asarray(scores, dtype=np.float64)
    preds = (scores >= threshold).astype(np.uint8)
    cm = confusion(preds, labels)
    rep = classification_report(cm)
    degenerate = list(rep["degenerate"])
    try:
        auc = roc_auc(scores, labels)
    except SingleClassLabels:
        auc = None
        degenerate.append("auc_single_class")
    return EvalReport(
        regime=regime,
        train_domain=train_domain,
        test_domain=test_domain,
        model_kind=model_kind,
        k_features=k_features,
        accuracy=rep["accuracy"],
        auc=auc,
        confusion=cm,
        benign=rep["benign"],
        malware=rep["malware"],
        n_rows=cm.total,
        degenerate=degenerate,
    )


METRIC_FIELDS = (
    "accuracy", "auc",
    "benign_precision", "benign_recall", "benign_f1",
    "malware_precision", "malware_recall", "malware_f1",
)


def flat_metrics(report: EvalReport) -> dict[str, float | None]:
    return {
        "accuracy": report.accuracy,
        "auc": report.auc,
        "benign_precision": report.benign.precision,
        "benign_recall": report.benign.recall,
        "benign_f1": report.benign.f1,
        "malware_precision": report.malware.precision,
        "malware_recall": report.malware.recall,
        "malware_f1": report.malware.f1,
    }


def aggregate(reports: Sequence[EvalReport]) -> dict[str, dict[str, float | None]]:
    """Mean and sample standard deviation of every metric across folds."""
    out = {}
    rows = [flat_metrics(r) for r in reports]
    for name in METRIC_FIELDS:
        vals = [r[name] for r in rows if r[name] is not None]
        if not vals:
            out[name] = {"mean": None, "std": None}
            continue
        out[name] = {
            "mean": float(statistics.fmean(vals)) if len(set(vals)) > 1 else float(vals[0]),
            "std": float(statistics.stdev(vals)) if len(vals) > 1 else 0.0,
        }
    return out


def format_percent(x: float | None) -> str:
    """Ratio shown as a percentage with two decimals, rounding half to even."""
    if x is None:
        return "n/a"
    return str((Decimal(x) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))
