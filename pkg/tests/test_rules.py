import json
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_model
from hypernn.data import Standardizer
from hypernn.model import HyperNNModel, crisp_contains, crisp_predict_batch
from hypernn.rules import RuleSet, export_rules, prune_boxes


def test_identity_rendering():
    m = HyperNNModel([[0.0, 0.0]], [[1.0, 1.0]])
    rs = export_rules(m, feature_names=["a", "b"])
    assert rs.to_text() == "(0 ≤ a ≤ 1) ∧ (0 ≤ b ≤ 1)"
    assert rs.to_sql() == "WHERE ((a BETWEEN 0 AND 1) AND (b BETWEEN 0 AND 1))"


def test_destandardized_bounds():
    m = HyperNNModel([[0.0]], [[1.0]])
    rs = export_rules(m, Standardizer([2.0], [3.0], ["a"]))
    assert rs.to_text() == "(2 ≤ a ≤ 5)"


def test_multiple_boxes_joined_by_or():
    m = HyperNNModel([[0.0], [2.0]], [[1.0], [0.5]])
    rs = export_rules(m, feature_names=["weird name"])
    assert rs.to_text() == "(0 ≤ weird name ≤ 1)\n∨ (2 ≤ weird name ≤ 2.5)"
    assert '"weird name" BETWEEN 2 AND 2.5' in rs.to_sql()


def test_dimension_mismatch():
    m = HyperNNModel([[0.0, 0.0]], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        export_rules(m, Standardizer([0.0], [1.0]))
    with pytest.raises(ValueError):
        export_rules(m, feature_names=["a"])


def test_coverage_counts():
    m = HyperNNModel([[0.0], [5.0]], [[1.0], [1.0]])
    X = np.array([[0.5], [0.7], [5.5], [3.0]])
    y = np.array([1, 0, 1, 1])
    rs = export_rules(m, X=X, y=y)
    assert [(r.positives, r.negatives) for r in rs.rules] == [(1, 1), (1, 0)]
    assert all(r.positives + r.negatives <= len(X) for r in rs.rules)


def test_json_and_files_roundtrip(tmp_path, rng):
    m = random_model(rng, M=3, d=2)
    rs = export_rules(m, Standardizer([1.0, -2.0], [0.5, 4.0], ["p", "q"]))
    paths = rs.write(tmp_path)
    back = RuleSet.from_dict(json.loads(paths["json"].read_text()))
    for a, b in zip(back.rules, rs.rules):
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)
    assert paths["text"].read_text().startswith("(")
    assert paths["sql"].read_text().startswith("WHERE (")


def test_rule_roundtrip_matches_crisp_predict():
    rng = np.random.default_rng(7)
    mismatches = 0
    positives = 0
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        m = random_model(rng, M=int(rng.integers(1, 4)), d=d)
        std = Standardizer(rng.normal(size=d) * 10, rng.uniform(0.1, 10, size=d))
        rs = export_rules(m, std)
        z = rng.normal(size=d)
        x_raw = std.invert(z)
        crisp = crisp_predict_batch(m, z[None])[0]
        positives += crisp
        if crisp == 1 and not rs.covers(x_raw, atol=1e-9)[0]:
            mismatches += 1
        if crisp == 0 and rs.covers(x_raw, atol=-1e-9)[0]:
            mismatches += 1
    assert mismatches == 0
    assert 0 < positives < 1000


@given(st.integers(0, 2**32 - 1))
def test_rendered_bounds_ordered(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    m = random_model(rng, M=int(rng.integers(1, 5)), d=d)
    m.theta_l[0, 0] = 0.0  # include a degenerate span
    rs = export_rules(m, Standardizer(rng.normal(size=d), rng.uniform(1e-3, 1e3, size=d)))
    assert all(np.all(r.lower <= r.upper) for r in rs.rules)


@given(st.integers(0, 2**32 - 1))
def test_rules_agree_with_containment_on_grazing_points(seed):
    # points exactly on a face in standardized space land on the rendered bound within 1e-9
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    m = random_model(rng, M=1, d=d)
    std = Standardizer(rng.normal(size=d), rng.uniform(0.5, 2.0, size=d))
    rs = export_rules(m, std)
    box = m.boxes[0]
    z = box.theta_m + rng.uniform(0, 1, size=d) * box.theta_l
    j = int(rng.integers(d))
    z[j] = box.theta_u[j] if rng.integers(2) else box.theta_m[j]
    assert crisp_contains(box, z)
    assert rs.covers(std.invert(z), atol=1e-9)[0]


# -- pruning ----------------------------------------------------------------

def test_prune_removes_far_box(caplog):
    m = HyperNNModel([[0.0, 0.0], [100.0, 100.0]], [[1.0, 1.0], [1.0, 1.0]])
    X = np.array([[0.5, 0.5], [0.2, 0.9], [3.0, 3.0]])
    y = np.array([1, 1, 0])
    with caplog.at_level(logging.INFO, logger="hypernn.rules"):
        p = prune_boxes(m, X, y)
    assert p.M == 1 and p.theta_m[0, 0] == 0.0
    assert "pruned 1 of 2" in caplog.text


def test_prune_keeps_best_single_box_when_all_empty():
    m = HyperNNModel([[10.0], [2.0], [50.0]], [[1.0], [1.0], [1.0]], tau=1.0)
    X = np.array([[0.0], [0.5], [5.0]])
    y = np.array([1, 1, 0])
    p = prune_boxes(m, X, y)
    assert p.M == 1 and p.theta_m[0, 0] == 2.0


@given(st.integers(0, 2**32 - 1))
def test_prune_only_changes_points_of_removed_boxes(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, M=int(rng.integers(1, 6)), d=2)
    X = rng.normal(size=(60, 2)) * 1.5
    y = rng.integers(0, 2, size=60)
    p = prune_boxes(m, X, y)
    assert 1 <= p.M <= m.M
    before = crisp_predict_batch(m, X)
    after = crisp_predict_batch(p, X)
    # tp unchanged and fp not increased, so training F1 cannot drop
    assert np.sum((after == 1) & (y == 1)) == np.sum((before == 1) & (y == 1))
    assert np.sum((after == 1) & (y == 0)) <= np.sum((before == 1) & (y == 0))
    kept = {tuple(r) for r in np.hstack([p.theta_m, p.theta_l])}
    removed = [k for k in range(m.M) if tuple(np.hstack([m.theta_m[k], m.theta_l[k]])) not in kept]
    changed = np.flatnonzero(before != after)
    for i in changed:
        owners = [k for k in range(m.M) if crisp_contains(m.boxes[k], X[i])]
        assert owners and set(owners) <= set(removed)
