"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
import time
from pathlib import Path

from . import experiment as ex
from ._parallel import get_threads, set_threads
from .errors import ConfigError, DataError, InvariantViolation
from .tables import load_reports, render_tables

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=default, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--threads", type=int, default=default, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permshift", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    add("gen-synth", "write the synthetic domain pair as CSV")
    add("select", "minimal top-k Pearson feature selection")
    add("train", "train and persist intra-domain models")
    add("eval", "intra-domain reports")
    p = add("cross-eval", "cross-domain reports")
    p.add_argument("--direction", choices=["a_to_b", "b_to_a", "both"], default=None)
    p = add("hybrid", "common-feature hybrid training with cross-validation")
    p.add_argument("--eval-on-original-test", action="store_true",
                   help="also score fold models on the original test splits")
    p = add("explain", "violin, importance-shift and waterfall exports")
    p.add_argument("--domain", action="append", default=None, help="domain to explain (repeatable)")
    p = add("report", "run every configured regime, then write tables and the index")
    p.add_argument("--no-explain", action="store_true", help="skip attribution exports")
    p.add_argument("--eval-on-original-test", action="store_true")
    return parser


def load_config(args: argparse.Namespace) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    return cfg.replace(seed=args.seed, out_dir=args.out)


def _print_reports(docs: dict[str, dict]) -> None:
    for kind, doc in docs.items():
        for r in doc["reports"]:
            extra = f" fold={r['audit']['fold']}" if "fold" in r["audit"] else ""
            print(f"{doc['regime']:6s} {kind:13s} {r['train_domain']:>5s} -> {r['test_domain']:<3s}"
                  f" acc={r['accuracy']:.4f} auc={r['auc'] if r['auc'] is None else round(r['auc'], 4)}{extra}")


def run_command(args: argparse.Namespace) -> dict[str, float]:
    cfg = load_config(args)
    exp = ex.Experiment(cfg)
    exp.out.mkdir(parents=True, exist_ok=True)
    ex.write_config(exp)
    timings: dict[str, float] = {}

    def timed(label, fn, *a, **kw):
        t0 = time.perf_counter()
        result = fn(*a, **kw)
        timings[label] = round(time.perf_counter() - t0, 3)
        return result

    cmd = args.command
    if cmd == "gen-synth":
        for path in timed("gen_synth", ex.export_synth, exp):
            print(path)
    elif cmd == "select":
        def select_all():
            for name in cfg.selection_domains:
                for kind in exp.kinds():
                    sel = exp.selection(name, kind)
                    print(f"{name} {kind}: k={sel.k} of {len(exp.domains[name].catalog)}"
                          f" (holdout acc {sel.achieved_accuracy:.4f},"
                          f" full {sel.full_feature_accuracy:.4f})")
        if not cfg.selection_domains:
            print("feature selection is disabled in this config")
        timed("select", select_all)
    elif cmd == "train":
        def train_all():
            for name in exp.names:
                for kind in exp.kinds():
                    m = exp.intra_model(name, kind)
                    print(f"{name} {kind}: {m.n_trees} trees on {len(m.catalog)} features")
        timed("train", train_all)
    elif cmd == "eval":
        docs = timed("intra", ex.run_intra, exp)
        ex.emit_report(exp, "intra", docs)
        _print_reports(docs)
    elif cmd == "cross-eval":
        dirs = None
        if args.direction in ("a_to_b", "b_to_a"):
            dirs = [f"cross_{args.direction}"]
        elif args.direction == "both" or not any(r.startswith("cross") for r in cfg.regimes):
            dirs = ["cross_a_to_b", "cross_b_to_a"]
        docs = timed("cross", ex.run_cross, exp, dirs)
        ex.emit_report(exp, "cross", docs)
        _print_reports(docs)
    elif cmd == "hybrid":
        docs = timed("hybrid", ex.run_hybrid, exp, args.eval_on_original_test or None)
        ex.emit_report(exp, "hybrid", docs)
        _print_reports(docs)
    elif cmd == "explain":
        timed("explain", ex.run_explain, exp, args.domain)
    elif cmd == "report":
        run_pipeline(exp, timed, explain=not args.no_explain,
                     eval_on_original_test=args.eval_on_original_test or None)
    ex.write_index(exp, {
        "command": cmd,
        "finished_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "threads": get_threads(),
        "timings_s": timings,
    })
    return timings


def run_pipeline(exp: ex.Experiment, timed, explain: bool = True, eval_on_original_test=None) -> None:
    """Every configured regime, attribution exports and the markdown tables."""
    regimes = exp.config.regimes
    if "intra" in regimes:
        ex.emit_report(exp, "intra", timed("intra", ex.run_intra, exp))
    if any(r.startswith("cross") for r in regimes):
        ex.emit_report(exp, "cross", timed("cross", ex.run_cross, exp))
    if "hybrid" in regimes:
        ex.emit_report(exp, "hybrid", timed("hybrid", ex.run_hybrid, exp, eval_on_original_test))
    if explain:
        timed("explain", ex.run_explain, exp)
    text = render_tables(load_reports(exp.out), exp.names)
    exp._write_text("tables.md", text)
    print(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            set_threads(args.threads)
        run_command(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
