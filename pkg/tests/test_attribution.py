import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_dataset, random_dataset
from oracles import shapley_by_subsets
from permshift import _kernels
from permshift.attribution import (
    BackgroundSet,
    ImportanceShift,
    ShapAttribution,
    coalition_value,
    global_importance,
    importance_shift,
    shap_exact,
    shap_tree,
    shap_tree_batch,
    waterfall,
)
from permshift.data import FeatureCatalog, align_to_catalog, project
from permshift.errors import TooManyFeaturesForExact, WidthMismatch
from permshift.learners import LearnerConfig, Tree, TreeEnsembleModel, train


def names(n):
    return tuple(f"f{i}" for i in range(n))


def model_of(kind, trees, n_features, base=0.0):
    cfg = LearnerConfig.default(kind)
    return TreeEnsembleModel(kind, list(trees), FeatureCatalog(names(n_features)), cfg, base)


def background(rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.uint8))
    return BackgroundSet(make_dataset(rows, np.zeros(len(rows)), list(names(rows.shape[1]))))


def build_tree(spec) -> Tree:
    """Nested (feature, left, right) tuples with float leaves."""
    feature, left, right, value = [], [], [], []

    def visit(node):
        i = len(feature)
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        if isinstance(node, tuple):
            value.append(0.0)
            feature[i] = node[0]
            left[i] = visit(node[1])
            right[i] = visit(node[2])
        else:
            value.append(float(node))
        return i

    visit(spec)
    n = len(feature)
    return Tree(np.array(feature), np.array(left), np.array(right), np.array(value), np.ones(n))


def random_tree(rng, n_features, depth, leaf_low=0.0, leaf_high=1.0) -> Tree:
    """Arbitrary structure; features may repeat along a path."""
    def grow(d):
        if d == 0 or rng.random() < 0.2:
            return float(rng.uniform(leaf_low, leaf_high))
        return (int(rng.integers(n_features)), grow(d - 1), grow(d - 1))

    return build_tree(grow(depth))


# -- coalition values ----------------------------------------------------------------


def test_coalition_boundaries():
    rng = np.random.default_rng(0)
    m = model_of("random_forest", [random_tree(rng, 4, 3) for _ in range(3)], 4)
    bg = background(rng.random((6, 4)) < 0.5)
    x = np.array([1, 0, 1, 1])
    assert coalition_value(m, x, range(4), bg) == pytest.approx(m.predict_proba(x), abs=1e-15)
    assert coalition_value(m, x, [], bg) == pytest.approx(np.mean(m.predict_proba(bg.X)), abs=1e-15)
    mask = np.array([True, False, True, False])
    assert coalition_value(m, x, mask, bg) == coalition_value(m, x, [0, 2], bg)


def test_coalition_constant_model():
    m = model_of("random_forest", [Tree.leaf(0.7)], 3)
    bg = background([[0, 1, 0], [1, 1, 1]])
    for S in ([], [0], [1, 2], [0, 1, 2]):
        assert coalition_value(m, [1, 0, 1], S, bg) == pytest.approx(0.7)


def test_coalition_gbdt_probability_space():
    m = model_of("gbdt", [build_tree((0, -1.0, 2.0))], 2, base=0.5)
    bg = background([[0, 0], [1, 0]])
    expit = lambda z: 1 / (1 + math.exp(-z))
    assert coalition_value(m, [1, 1], [], bg) == pytest.approx((expit(-0.5) + expit(2.5)) / 2)
    assert coalition_value(m, [1, 1], [], bg, output="log_odds") == pytest.approx(1.0)


def test_coalition_width_checks():
    m = model_of("random_forest", [Tree.leaf(0.5)], 3)
    with pytest.raises(WidthMismatch):
        coalition_value(m, [1, 0], [], background([[0, 0, 0]]))
    with pytest.raises(WidthMismatch):
        coalition_value(m, [1, 0, 0], [], background([[0, 0]]))


# -- pinned examples ----------------------------------------------------------------


def test_single_leaf_null_attribution():
    m = model_of("random_forest", [Tree.leaf(0.35)], 4)
    bg = background([[0, 1, 0, 1], [1, 1, 0, 0]])
    for explain in (shap_exact, shap_tree):
        att = explain(m, [1, 0, 0, 1], bg)
        assert (att.phi == 0).all()
        assert att.base_value == pytest.approx(0.35) and att.fx == pytest.approx(0.35)


def test_stump_example():
    m = model_of("random_forest", [build_tree((0, 0.2, 0.8))], 3)
    bg = background([[0, 1, 0]])
    for explain in (shap_exact, shap_tree):
        att = explain(m, [1, 0, 1], bg)
        assert att.base_value == pytest.approx(0.2, abs=1e-15)
        assert att.phi[0] == pytest.approx(0.6, abs=1e-15)
        assert att.phi[1] == 0.0 and att.phi[2] == 0.0


XOR = build_tree((0, (1, 0.0, 1.0), (1, 1.0, 0.0)))
UNIFORM = [[0, 0], [0, 1], [1, 0], [1, 1]]


@pytest.mark.parametrize("x,expected", [([1, 1], -0.25), ([1, 0], 0.25), ([0, 0], -0.25), ([0, 1], 0.25)])
def test_xor_tree_pinned(x, expected):
    m = model_of("random_forest", [XOR], 2)
    bg = background(UNIFORM)
    reference, _, _ = shapley_by_subsets(m.predict_proba, x, UNIFORM)
    assert reference == pytest.approx([expected, expected], abs=1e-15)
    for explain in (shap_exact, shap_tree):
        att = explain(m, x, bg)
        assert att.phi == pytest.approx([expected, expected], abs=1e-15)
        assert att.base_value == pytest.approx(0.5)


def test_instance_equal_to_background_row():
    rng = np.random.default_rng(3)
    m = model_of("gbdt", [random_tree(rng, 5, 4, -1, 1) for _ in range(4)], 5, base=0.2)
    x = np.array([1, 0, 1, 1, 0])
    att = shap_tree(m, x, background([x]))
    assert (np.abs(att.phi) <= 1e-15).all()
    assert att.fx == pytest.approx(att.base_value, abs=1e-15)


def test_two_identical_trees_equal_one_tree():
    rng = np.random.default_rng(4)
    t = random_tree(rng, 6, 5)
    bg = background(rng.random((10, 6)) < 0.5)
    x = np.array([0, 1, 1, 0, 1, 0])
    one = shap_tree(model_of("random_forest", [t], 6), x, bg)
    two = shap_tree(model_of("random_forest", [t, t], 6), x, bg)
    assert two.phi == pytest.approx(one.phi, abs=1e-15)


def test_exact_guard():
    m = model_of("random_forest", [Tree.leaf(0.5)], 21)
    with pytest.raises(TooManyFeaturesForExact):
        shap_exact(m, np.zeros(21), background(np.zeros((1, 21))))


# -- properties ---------------------------------------------------------------------


cases = st.tuples(st.integers(0, 2**32 - 1), st.integers(2, 9), st.integers(1, 6), st.integers(1, 24),
                  st.sampled_from(["random_forest", "gbdt"]))


def random_case(seed, F, depth, n_bg, kind):
    rng = np.random.default_rng(seed)
    lo, hi = (0.0, 1.0) if kind == "random_forest" else (-2.0, 2.0)
    trees = [random_tree(rng, F, depth, lo, hi) for _ in range(int(rng.integers(1, 5)))]
    m = model_of(kind, trees, F, base=float(rng.normal()))
    Z = (rng.random((n_bg, F)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
    x = (rng.random(F) < 0.5).astype(np.uint8)
    return m, x, Z


@given(cases)
def test_tree_matches_exact_and_independent_oracle(case):
    m, x, Z = random_case(*case)
    bg = background(Z)
    exact = shap_exact(m, x, bg)
    tree = shap_tree(m, x, bg)
    ref, base, fx = shapley_by_subsets(m.decision_function, x, Z)
    assert np.abs(exact.phi - ref).max() <= 1e-12
    assert np.abs(tree.phi - exact.phi).max() <= 1e-9
    assert tree.additivity_error() <= 1e-9 and exact.additivity_error() <= 1e-9
    assert tree.base_value == pytest.approx(base, abs=1e-12) and tree.fx == pytest.approx(fx, abs=1e-12)


@given(cases)
def test_fallback_kernel_matches_exact(case):
    m, x, Z = random_case(*case)
    feature, left, right, value, roots = m._packed
    scale = 1.0 / m.n_trees if m.kind == "random_forest" else 1.0
    max_path = int(_kernels.max_path_length(left, right, feature, roots))
    X = np.ascontiguousarray(np.vstack([x, 1 - x, Z[:1]]))
    phi = _kernels.tree_shap_batch(X, np.ascontiguousarray(Z), feature, left, right, value, roots,
                                   scale, max_path)
    for row, got in zip(X, phi):
        assert np.abs(got - shap_exact(m, row, background(Z)).phi).max() <= 1e-9


@given(cases)
def test_null_player(case):
    m, x, Z = random_case(*case)
    used = set()
    for t in m.trees:
        used |= set(t.feature[t.feature >= 0].tolist())
    att = shap_tree(m, x, background(Z))
    for j in range(len(x)):
        if j not in used:
            assert att.phi[j] == 0.0


def test_symmetry_on_duplicated_columns():
    t = build_tree((0, (1, 0.1, 0.5), (1, 0.5, 0.9)))
    m = model_of("random_forest", [t], 3)
    rng = np.random.default_rng(8)
    col = rng.integers(0, 2, 12)
    Z = np.column_stack([col, col, rng.integers(0, 2, 12)])
    for x in ([1, 1, 0], [0, 0, 1]):
        for explain in (shap_exact, shap_tree):
            phi = explain(m, x, background(Z)).phi
            assert abs(phi[0] - phi[1]) <= 1e-9


@given(st.integers(0, 2**32 - 1))
def test_linearity_over_trees(seed):
    rng = np.random.default_rng(seed)
    trees = [random_tree(rng, 6, 4) for _ in range(3)]
    Z = rng.random((9, 6)) < 0.5
    x = rng.random(6) < 0.5
    bg = background(Z)
    whole = shap_tree(model_of("random_forest", trees, 6), x, bg).phi
    parts = [shap_tree(model_of("random_forest", [t], 6), x, bg).phi for t in trees]
    assert np.abs(whole - np.mean(parts, axis=0)).max() <= 1e-12


def test_trained_models_batch_additivity():
    rng = np.random.default_rng(11)
    data = random_dataset(rng, 300, 30, signal=5)
    bg = BackgroundSet.sample(data, 50, seed=1)
    for cfg in (LearnerConfig("random_forest", n_trees=20, seed=2),
                LearnerConfig("gbdt", n_trees=20, max_depth=4, min_samples_leaf=5)):
        m = train(data, cfg)
        phi, base, fx = shap_tree_batch(m, data.X[:100], bg)
        err = np.abs(base + phi.sum(axis=1) - fx)
        assert err.max() <= 1e-9


def test_gbdt_reports_both_spaces():
    m = model_of("gbdt", [build_tree((0, -1.0, 1.0))], 2, base=0.3)
    att = shap_tree(m, [1, 0], background([[0, 0], [0, 1]]))
    assert att.space == "log_odds"
    assert att.fx == pytest.approx(1.3) and att.base_value == pytest.approx(-0.7)
    assert att.fx_probability == pytest.approx(1 / (1 + math.exp(-1.3)))
    assert att.base_probability == pytest.approx(1 / (1 + math.exp(0.7)))
    doc = att.to_dict()
    assert set(doc["phi"]) == {"f0", "f1"} and "fx_probability" in doc


def test_background_sampling():
    data = random_dataset(np.random.default_rng(2), 40, 4)
    bg = BackgroundSet.sample(data, 10, seed=5)
    assert bg.size == 10 and len(set(bg.rows.row_index.tolist())) == 10
    assert np.array_equal(bg.rows.row_index, BackgroundSet.sample(data, 10, seed=5).rows.row_index)
    assert BackgroundSet.sample(data, 100, seed=5).size == 40
    with pytest.raises(ValueError):
        BackgroundSet(data.take([]))


# -- global summaries ------------------------------------------------------------------


def test_global_importance_constant_model():
    data = random_dataset(np.random.default_rng(1), 30, 5)
    m = TreeEnsembleModel("random_forest", [Tree.leaf(0.4)], data.catalog, LearnerConfig())
    gi = global_importance(m, data, BackgroundSet.sample(data, 10))
    assert (gi.mean_abs == 0).all()


def test_global_importance_export_sizes_and_ranking():
    rng = np.random.default_rng(3)
    X = (rng.random((200, 20)) < 0.5).astype(np.uint8)
    y = X[:, 7].copy()
    data = make_dataset(X, y)
    m = train(data, LearnerConfig("random_forest", n_trees=10, seed=0))
    gi = global_importance(m, data.take(np.arange(40)), BackgroundSet.sample(data, 30), top_n=15)
    assert gi.ranking()[0] == "f7"
    assert len(gi.top()) == 15
    assert len(gi.points()) == 40 * 15
    lines = gi.violin_csv().splitlines()
    assert lines[0] == "feature,value,phi" and len(lines) == 1 + 40 * 15
    assert (gi.mean_abs >= 0).all()
    assert list(gi.to_dict()["mean_abs"])[0] == "f7"


def test_importance_shift_identity_and_zero_fill():
    rng = np.random.default_rng(5)
    data = random_dataset(rng, 150, 6, signal=3)
    m = train(data, LearnerConfig("random_forest", n_trees=8, seed=1))
    bg = BackgroundSet.sample(data, 20)
    same = importance_shift(m, data, data, bg)
    assert all(a == b for _, a, b in same.table())

    # the cross domain lacks f0, so alignment zero-fills it
    cross = project(data, FeatureCatalog(names(6)[1:]))
    shift = importance_shift(m, data, cross, bg)
    zeroed = align_to_catalog(cross, m.catalog)
    expected = np.abs(shap_tree_batch(m, zeroed.X, bg)[0][:, 0]).mean()
    assert dict((n, c) for n, _, c in shift.table())["f0"] == pytest.approx(expected, abs=1e-15)


def test_importance_shift_ordering_and_csv():
    s = ImportanceShift(("a", "b", "c"), np.array([0.1, 0.5, 0.2]), np.array([0.4, 0.1, 0.2]))
    assert [r[0] for r in s.table()] == ["b", "a", "c"]
    assert [r[0] for r in s.largest_shifts(2)] == ["b", "a"]
    lines = s.to_csv().splitlines()
    assert lines[0] == "feature,intra_mean_abs,cross_mean_abs" and lines[1].startswith("b,0.5")


# -- waterfalls --------------------------------------------------------------------


def att(phi, base=0.25):
    phi = np.asarray(phi, dtype=float)
    return ShapAttribution(phi, base, base + math.fsum(phi), names(len(phi)), "probability")


def test_waterfall_full():
    w = waterfall(att([0.1, -0.3, 0.05]), top_n=5)
    assert [s["feature"] for s in w.steps] == ["f1", "f0", "f2"]
    assert w.steps[0]["start"] == 0.25
    assert w.steps[-1]["end"] == pytest.approx(w.fx, abs=1e-15)
    assert all("collapsed" not in s for s in w.steps)
    for a, b in zip(w.steps, w.steps[1:]):
        assert a["end"] == b["start"]


def test_waterfall_collapses_rest():
    a = att([0.1, -0.3, 0.05, 0.02])
    w = waterfall(a, top_n=1)
    assert len(w.steps) == 2
    assert w.steps[1]["collapsed"] == 3 and w.steps[1]["feature"] == "3 other features"
    assert math.fsum(s["phi"] for s in w.steps) == pytest.approx(a.fx - a.base_value, abs=1e-15)
    assert w.steps[-1]["end"] == pytest.approx(a.fx, abs=1e-15)


def test_waterfall_all_zero_and_bad_top():
    w = waterfall(att([0.0, 0.0]), top_n=3)
    assert w.steps == [] and w.base_value == w.fx
    with pytest.raises(ValueError):
        waterfall(att([0.1]), top_n=0)
