import itertools

import numpy as np
import pytest

from mllp.binarizer import FeatureDictionary, FeatureEntry
from mllp.crs import (
    CrsModel,
    crs_forward,
    decode,
    edge_count,
    fallback_count,
    predict,
    render_rules,
    rule_tree,
    rules_json,
)
from mllp.errors import DataError, DimensionError
from mllp.logic import conj_layer_forward, disj_layer_forward


def test_single_level_examples():
    crs = CrsModel([[[1, 1]], [[1]]])
    assert crs_forward(crs, [1, 1])[-1].tolist() == [1]
    assert crs_forward(crs, [1, 0])[-1].tolist() == [0]
    assert edge_count(crs) == 3
    assert edge_count(CrsModel([np.zeros((2, 3)), np.zeros((2, 2))])) == 0


def test_decode_examples():
    assert decode(np.array([0, 1, 0]), 0).tolist() == [1]
    assert decode(np.array([1, 1, 0]), 2).tolist() == [0]
    assert decode(np.array([0, 0, 0]), 2).tolist() == [2]


def test_predict_and_fallback_count():
    # class 0 fires on x0, class 1 on x1
    crs = CrsModel([np.eye(2), np.eye(2)], fallback_class=1)
    X = np.array([[1, 0], [0, 1], [1, 1], [0, 0]])
    assert predict(crs, X).tolist() == [0, 1, 0, 1]
    assert predict(crs, [1, 0]) == 0
    assert fallback_count(crs, X) == 1


def test_shape_validation():
    with pytest.raises(DimensionError):
        CrsModel([np.ones((2, 3))])
    with pytest.raises(DimensionError):
        CrsModel([np.ones((2, 3)), np.ones((2, 3))])
    with pytest.raises(DimensionError):
        CrsModel([np.full((1, 1), 2), np.ones((1, 1))])
    with pytest.raises(DimensionError):
        crs_forward(CrsModel([[[1, 1]], [[1]]]), [1, 0, 1])


def test_matches_continuous_layers_at_binary_weights():
    rng = np.random.default_rng(0)
    for _ in range(30):
        widths = [int(rng.integers(1, 9)) for _ in range(5)]
        layers = [rng.integers(0, 2, (widths[l], widths[l - 1])) for l in range(1, 5)]
        crs = CrsModel(layers)
        X = rng.integers(0, 2, (32, widths[0])).astype(float)
        H = X
        for l, W in enumerate(layers, start=1):
            H = conj_layer_forward(H, W) if l % 2 else disj_layer_forward(H, W)
        assert np.array_equal(crs_forward(crs, X)[-1], H.astype(np.uint8))


def _dictionary(conds):
    return FeatureDictionary([FeatureEntry(j, f"c{j}", c) for j, c in enumerate(conds)], [])


def test_render_examples():
    dic = _dictionary(["x < 2.5", "color = red", "y >= 1"])
    crs = CrsModel([[[1, 1, 0], [0, 0, 1], [0, 0, 0]], [[1, 1, 0], [0, 0, 1]]], dic, label_order=["no", "yes"])
    assert render_rules(crs, 1, 0) == "r1[0]:\n  IF (x < 2.5) AND (color = red)\n"
    assert render_rules(crs, 1, 2) == "r1[2]:\n  TRUE\n"
    text = render_rules(crs)
    assert text.splitlines()[:4] == [
        "s2[0] (class = no):",
        "  IF (x < 2.5) AND (color = red)",
        "  OR",
        "  IF (y >= 1)",
    ]
    assert "s2[1] (class = yes):" in text
    with pytest.raises(KeyError):
        render_rules(crs, 3, 0)
    with pytest.raises(KeyError):
        render_rules(crs, 1, 7)


def test_render_empty_disjunction_and_nesting():
    crs = CrsModel([np.eye(2), [[1, 1]], [[1]], [[0]]])
    assert render_rules(crs, 4, 0) == "s4[0]:\n  FALSE\n"
    nested = render_rules(crs, 3, 0)
    assert nested.splitlines() == ["r3[0]:", "  s2[0]:", "    IF (x0)", "    OR", "    IF (x1)"]


def _eval_tree(node, x):
    if "feature" in node:
        return bool(x[node["feature"]])
    vals = [_eval_tree(c, x) for c in node["children"]]
    return all(vals) if node["op"] == "AND" else any(vals)


def test_rule_trees_reproduce_predictions():
    # interpreting the exported trees must give the same outputs as the model
    rng = np.random.default_rng(4)
    for _ in range(20):
        J = int(rng.integers(1, 8))
        widths = [J] + [int(rng.integers(1, 5)) for _ in range(3)] + [3]
        crs = CrsModel([rng.integers(0, 2, (widths[l], widths[l - 1])) for l in range(1, 5)], fallback_class=2)
        doc = rules_json(crs)
        for x in itertools.product([0, 1], repeat=J):
            outs = [_eval_tree(t, x) for t in doc["outputs"]]
            fired = [i for i, v in enumerate(outs) if v]
            want = fired[0] if fired else doc["fallback_class"]
            assert predict(crs, np.array(x)) == want


def test_rule_tree_shape():
    crs = CrsModel([[[1, 0, 1]], [[1]]], _dictionary(["a", "b", "c"]))
    assert rule_tree(crs, 1, 0) == {
        "node": "r1[0]",
        "op": "AND",
        "children": [{"feature": 0, "condition": "a"}, {"feature": 2, "condition": "c"}],
    }


def test_json_round_trip(tmp_path):
    dic = _dictionary(["a", "b"])
    crs = CrsModel([np.eye(2), [[1, 0], [1, 1]]], dic, fallback_class=1, label_order=["p", "q"])
    crs.save(tmp_path / "c.json")
    back = CrsModel.load(tmp_path / "c.json")
    assert back.to_json() == crs.to_json()
    (tmp_path / "bad.json").write_text('{"format": "mllp.model", "version": 1, "kind": "mllp"}')
    with pytest.raises(DataError):
        CrsModel.load(tmp_path / "bad.json")
