import json

import numpy as np
import pytest

from permshift.data import FeatureCatalog, catalog_intersection
from permshift.errors import EmptyIntersection, InvalidSpec
from permshift.learners import LearnerConfig, train
from permshift.selection import pearson_r
from permshift.synth import (
    FeatureGroup,
    ShiftSpec,
    default_spec,
    generate_domain_pair,
    informative_noise_dataset,
)

BIG = ShiftSpec(
    n_rows_a=6000,
    n_rows_b=6000,
    groups=(
        FeatureGroup("shared_stable", 3, 0.7, 0.2),
        FeatureGroup("shared_flipped", 2, 0.8, 0.3),
        FeatureGroup("shared_attenuated", 2, 0.6, 0.2, attenuation=0.25),
        FeatureGroup("a_only", 2, 0.5, 0.1),
        FeatureGroup("b_only", 2, 0.35, 0.65),
        FeatureGroup("noise", 2, 0.4, 0.4),
    ),
    malware_rate=0.4,
    seed=77,
)


def test_probabilities_match_spec():
    a, b = generate_domain_pair(BIG)
    for data, dom in ((a, "a"), (b, "b")):
        for g in BIG.groups:
            if not g.in_domain(dom):
                continue
            p1, p0 = g.probabilities(dom)
            for name in g.names():
                col = data.X[:, data.catalog.index(name)]
                assert abs(col[data.y == 1].mean() - p1) <= 0.03
                assert abs(col[data.y == 0].mean() - p0) <= 0.03
        assert abs(data.y.mean() - 0.4) <= 0.03


def test_group_probability_transforms():
    flip = FeatureGroup("shared_flipped", 1, 0.8, 0.3)
    assert flip.probabilities("a") == (0.8, 0.3) and flip.probabilities("b") == (0.3, 0.8)
    att = FeatureGroup("shared_attenuated", 1, 0.6, 0.2, attenuation=0.25)
    assert att.probabilities("b") == pytest.approx((0.45, 0.35))


def test_catalogs_overlap_on_shared_groups():
    cat_a, cat_b = BIG.catalog("a"), BIG.catalog("b")
    shared = catalog_intersection(cat_a, cat_b).names
    expected = [n for g in BIG.groups if g.kind.startswith("shared_") or g.kind == "noise" for n in g.names()]
    assert list(shared) == expected
    assert "aonly_000" in cat_a and "aonly_000" not in cat_b
    assert "bonly_001" in cat_b and "bonly_001" not in cat_a


def test_flipped_features_change_sign():
    a, b = generate_domain_pair(BIG)
    for name in BIG.groups[1].names():
        ra = pearson_r(a.X[:, a.catalog.index(name)], a.y).r
        rb = pearson_r(b.X[:, b.catalog.index(name)], b.y).r
        assert ra > 0.2 and rb < -0.2


def test_same_seed_same_data_and_tags():
    a1, b1 = generate_domain_pair(BIG)
    a2, b2 = generate_domain_pair(BIG)
    assert np.array_equal(a1.X, a2.X) and np.array_equal(b1.y, b2.y)
    assert set(a1.tags) == {"A"} and set(b1.tags) == {"B"}
    other = ShiftSpec(BIG.n_rows_a, BIG.n_rows_b, BIG.groups, BIG.malware_rate, seed=78)
    assert not np.array_equal(generate_domain_pair(other)[0].X, a1.X)


def test_stable_only_spec_has_no_shift():
    spec = ShiftSpec(3000, 3000, (FeatureGroup("shared_stable", 10, 0.65, 0.35),
                                  FeatureGroup("noise", 5, 0.5, 0.5)), seed=5)
    a, b = generate_domain_pair(spec)
    assert a.catalog == b.catalog
    model = train(a.take(np.arange(2000)), LearnerConfig("random_forest", n_trees=30, seed=1))
    acc_a = np.mean(model.predict_label(a.X[2000:]) == a.y[2000:])
    acc_b = np.mean(model.predict_label(b.X) == b.y)
    assert abs(acc_a - acc_b) <= 0.04


def test_zero_shared_features():
    exclusive = (FeatureGroup("a_only", 3, 0.9, 0.1), FeatureGroup("b_only", 3, 0.9, 0.1))
    with pytest.raises(InvalidSpec):
        ShiftSpec(10, 10, exclusive)
    # the catalogs such a spec would produce cannot be merged
    probe = ShiftSpec(10, 10, exclusive + (FeatureGroup("shared_stable", 1, 0.9, 0.1),))
    only_a = [n for n in probe.catalog("a").names if n.startswith("aonly")]
    only_b = [n for n in probe.catalog("b").names if n.startswith("bonly")]
    with pytest.raises(EmptyIntersection):
        catalog_intersection(FeatureCatalog(only_a), FeatureCatalog(only_b))


@pytest.mark.parametrize("groups,kw", [
    ((FeatureGroup("shared_stable", 2, 1.2, 0.1),), {}),
    ((FeatureGroup("shared_stable", -1, 0.8, 0.1),), {}),
    ((FeatureGroup("mystery", 2, 0.8, 0.1),), {}),
    ((FeatureGroup("shared_stable", 2, 0.5, 0.5), FeatureGroup("a_only", 2, 0.9, 0.1)), {}),
    ((FeatureGroup("shared_stable", 2, 0.8, 0.1),), {"malware_rate": 1.5}),
    ((FeatureGroup("shared_stable", 2, 0.8, 0.1),), {"n_rows_a": 0}),
    ((FeatureGroup("shared_stable", 2, 0.8, 0.1), FeatureGroup("noise", 2, 0.5, 0.5, prefix="stable")), {}),
    ((FeatureGroup("shared_stable", 2, 0.8, 0.1, attenuation=2.0),), {}),
])
def test_invalid_specs(groups, kw):
    args = {"n_rows_a": 10, "n_rows_b": 10, **kw}
    with pytest.raises(InvalidSpec):
        ShiftSpec(groups=groups, **args)


def test_spec_dict_round_trip(tmp_path):
    spec = default_spec(seed=3)
    assert ShiftSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(InvalidSpec):
        ShiftSpec.from_dict({"n_rows_a": 5})
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert ShiftSpec.load(path) == spec


def test_default_spec_shape():
    spec = default_spec()
    assert len(spec.catalog("a")) == 120 and len(spec.catalog("b")) == 120
    assert len(catalog_intersection(spec.catalog("a"), spec.catalog("b"))) == 60
    assert spec.n_rows_a == spec.n_rows_b == 6000


def test_informative_noise_dataset():
    data = informative_noise_dataset(n_rows=2000, seed=0)
    assert len(data.catalog) == 100
    info = [n for n in data.catalog.names if n.startswith("info_")]
    assert len(info) == 5
    for name in info:
        agree = np.mean(data.X[:, data.catalog.index(name)] == data.y)
        assert abs(agree - 0.8) <= 0.03
