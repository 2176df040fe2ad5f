"""Markdown tables rendered from report documents."""

from __future__ import annotations

from pathlib import Path

from . import jsonio
from .metrics import format_percent

SHORT = {"random_forest": "RF", "gbdt": "GBDT"}


def _pair(a: float | None, b: float | None) -> str:
    return f"{format_percent(a)}/{format_percent(b)}"


def _auc(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.4f}"


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(r) + " |" for r in rows]
    return out


def _class_cells(r: dict) -> list[str]:
    b, m = r["benign"], r["malware"]
    return [
        _pair(b["precision"], m["precision"]),
        _pair(b["recall"], m["recall"]),
        _pair(b["f1"], m["f1"]),
        _auc(r["auc"]),
    ]


def _mean_std(s: dict) -> str:
    if s["mean"] is None:
        return "n/a"
    return f"{format_percent(s['mean'])} ± {format_percent(s['std'])}"


def load_reports(out_dir: str | Path) -> dict[tuple[str, str], dict]:
    """All ``reports/{regime}__{learner}.json`` documents under a run directory."""
    docs = {}
    for path in sorted(Path(out_dir, "reports").glob("*__*.json")):
        regime, kind = path.stem.split("__", 1)
        docs[(regime, kind)] = jsonio.read_json(path)
    return docs


def render_tables(docs: dict[tuple[str, str], dict], domain_names: tuple[str, str]) -> str:
    """Intra, cross and hybrid tables plus an accuracy summary, as markdown."""
    kinds = sorted({k for _, k in docs}, key=lambda k: list(SHORT).index(k) if k in SHORT else 99)
    lines: list[str] = []

    for name in domain_names:
        rows, with_sel = [], False
        for kind in kinds:
            doc = docs.get(("intra", kind))
            if doc is None:
                continue
            rep = next(r for r in doc["reports"] if r["test_domain"] == name)
            sel = doc.get("selection", {}).get(name)
            with_sel = with_sel or sel is not None
            rows.append((kind, rep, sel))
        if not rows:
            continue
        lines += [f"### Intra-domain: {name}", ""]
        if with_sel:
            header = ["Classifier", "Selected Features", "Precision (B/M)", "Recall (B/M)",
                      "F1 (B/M)", "AUC", "Reduced Feature Accuracy (%)", "Full Feature Accuracy (%)"]
            body = [[SHORT.get(k, k), str(sel["k"]) if sel else "all", *_class_cells(r)[:4],
                     format_percent(r["accuracy"]),
                     format_percent(sel["full_feature_accuracy"]) if sel else format_percent(r["accuracy"])]
                    for k, r, sel in rows]
        else:
            header = ["Classifier", "Precision (B/M)", "Recall (B/M)", "F1 (B/M)", "AUC", "Accuracy (%)"]
            body = [[SHORT.get(k, k), *_class_cells(r), format_percent(r["accuracy"])] for k, r, _ in rows]
        lines += _table(header, body) + [""]

    pairs = [(domain_names[0], domain_names[1]), (domain_names[1], domain_names[0])]
    for src, dst in pairs:
        body = []
        for kind in kinds:
            doc = docs.get(("cross", kind))
            if doc is None:
                continue
            for r in doc["reports"]:
                if r["train_domain"] == src and r["test_domain"] == dst:
                    body.append([SHORT.get(kind, kind), *_class_cells(r), format_percent(r["accuracy"])])
        if body:
            lines += [f"### Cross-domain: {src} → {dst}", ""]
            lines += _table(["Classifier", "Precision (B/M)", "Recall (B/M)", "F1 (B/M)", "AUC",
                             "Accuracy (%)"], body) + [""]

    body = []
    for kind in kinds:
        doc = docs.get(("hybrid", kind))
        if doc is None:
            continue
        for name in domain_names:
            s = doc["summary"][name]
            body.append([SHORT.get(kind, kind), name] + [
                _mean_std(s[f]) for f in ("benign_precision", "benign_recall", "benign_f1",
                                          "malware_precision", "malware_recall", "malware_f1")
            ] + [
                "n/a" if s["auc"]["mean"] is None else f"{s['auc']['mean']:.4f} ± {s['auc']['std']:.4f}",
                _mean_std(s["accuracy"]),
            ])
    if body:
        folds = next(d["folds"] for (reg, _), d in docs.items() if reg == "hybrid")
        lines += [f"### Hybrid training, {folds}-fold CV (mean ± std)", ""]
        lines += _table(["Classifier", "Domain", "Benign Precision", "Benign Recall", "Benign F1",
                         "Malware Precision", "Malware Recall", "Malware F1", "AUC", "Accuracy (%)"],
                        body) + [""]

    summary = accuracy_summary(docs, domain_names)
    if summary:
        a, b = domain_names
        header = ["Classifier", f"Intra {a}", f"Intra {b}", f"{a} → {b}", f"{b} → {a}",
                  f"Hybrid {a}", f"Hybrid {b}"]
        body = [[SHORT.get(k, k)] + [format_percent(row.get(c)) for c in
                                     ("intra_a", "intra_b", "cross_ab", "cross_ba", "hybrid_a", "hybrid_b")]
                for k, row in ((k, summary[k]) for k in kinds if k in summary)]
        lines += ["### Accuracy summary (%)", ""] + _table(header, body) + [""]
    return "\n".join(lines)


def accuracy_summary(docs: dict[tuple[str, str], dict], domain_names: tuple[str, str]) -> dict[str, dict]:
    """Per learner: intra, cross and hybrid (mean) accuracy for both domains."""
    a, b = domain_names
    out: dict[str, dict] = {}
    for (regime, kind), doc in docs.items():
        row = out.setdefault(kind, {})
        if regime == "intra":
            for r in doc["reports"]:
                row["intra_a" if r["test_domain"] == a else "intra_b"] = r["accuracy"]
        elif regime == "cross":
            for r in doc["reports"]:
                row["cross_ab" if r["train_domain"] == a else "cross_ba"] = r["accuracy"]
        elif regime == "hybrid":
            row["hybrid_a"] = doc["summary"][a]["accuracy"]["mean"]
            row["hybrid_b"] = doc["summary"][b]["accuracy"]["mean"]
    return out
