import numpy as np
import pytest

from conftest import numeric_dataset, random_dataset
from app.helpers.tree import (
    fit_tree,
    predict_tree,
    predict_tree_batch,
    render_tree,
    split_statistics,
    weighted_accuracy,
)
from app.models.dataset import AttributeKind, AttributeSchema
from app.models.tree import CategoricalSplit, Leaf, NumericSplit, TreeConfig, TreeModel
from app.utils.errors import DataError

# every admissible candidate counts, so the oracle can enumerate freely
OPEN_CONFIG = TreeConfig(min_leaf_weight=0.0, min_split_gain_ratio=0.0)


def threshold_dataset():
    return numeric_dataset([1, 2, 3, 4], [0, 0, 1, 1])


def test_weather_outlook_statistics(weather):
    outlook = weather.attributes[0]
    assert outlook.kind == AttributeKind.categorical
    children = [
        np.bincount(weather.labels[weather.values[:, 0] == code], minlength=2)
        for code in range(len(outlook.categories))
    ]
    gain, split_info, ratio = split_statistics(children)
    assert gain == pytest.approx(0.2467, abs=5e-5)
    assert split_info == pytest.approx(1.5774, abs=5e-5)
    assert ratio == pytest.approx(0.1564, abs=5e-5)


def test_split_statistics_of_a_pure_partition():
    gain, split_info, ratio = split_statistics([[2, 0], [0, 2]])
    assert gain == pytest.approx(1.0)
    assert split_info == pytest.approx(1.0)
    assert ratio == pytest.approx(1.0)


def test_pure_labels_give_a_single_leaf():
    ds = numeric_dataset([[1.0], [2.0], [3.0]], [1, 1, 1])
    model = fit_tree(ds, np.ones(3))
    assert isinstance(model.root, Leaf)
    assert model.root.class_label == "pos"
    assert model.root.distribution == [0.0, 3.0]


def test_threshold_midpoint():
    ds = threshold_dataset()
    model = fit_tree(ds, np.full(4, 0.25))
    assert isinstance(model.root, NumericSplit)
    assert model.root.threshold == 2.5
    assert [child.class_label for child in model.root.children] == ["neg", "pos"]
    assert model.root.child_weights == [0.5, 0.5]
    assert weighted_accuracy(model, ds, np.full(4, 0.25)) == 1.0
    assert predict_tree(model, [3.0])[0] == "pos"
    assert predict_tree(model, [2.5])[0] == "neg"


def test_leaf_prediction_reports_minority_fraction():
    model = TreeModel(
        root=Leaf(class_label="pos", distribution=[1.0, 3.0]),
        attributes=[AttributeSchema(name="x0", kind=AttributeKind.numeric)],
        classes=["neg", "pos"],
        minority_label="pos",
        config=TreeConfig(),
    )
    assert predict_tree(model, [10.0]) == ("pos", 0.75)
    codes, scores = predict_tree_batch(model, np.array([[0.0], [1.0]]))
    assert codes.tolist() == [1, 1]
    assert scores.tolist() == [0.75, 0.75]


def categorical_model(child_weights):
    return TreeModel(
        root=CategoricalSplit(
            attribute=0,
            branches={0: 0, 1: 1, 2: 2},
            children=[
                Leaf(class_label="neg", distribution=[5.0, 0.0]),
                Leaf(class_label="pos", distribution=[0.0, 1.0]),
                Leaf(class_label="pos", distribution=[0.0, 1.0]),
            ],
            child_weights=child_weights,
        ),
        attributes=[
            AttributeSchema(
                name="colour", kind=AttributeKind.categorical, categories=["r", "g", "b", "y"]
            )
        ],
        classes=["neg", "pos"],
        minority_label="pos",
        config=TreeConfig(),
    )


def test_unseen_category_routes_to_the_heaviest_child():
    test_cases = [
        {"child_weights": [5.0, 1.0, 1.0], "expected": "neg"},
        {"child_weights": [1.0, 5.0, 5.0], "expected": "pos"},
    ]
    for case in test_cases:
        model = categorical_model(case["child_weights"])
        assert predict_tree(model, [3.0])[0] == case["expected"]
        codes, _ = predict_tree_batch(model, np.array([[3.0], [0.0]]))
        assert model.classes[codes[0]] == case["expected"]
        assert model.classes[codes[1]] == "neg"


def test_weighted_accuracy_examples():
    ds = numeric_dataset([[0.0], [1.0]], [0, 1])
    constant = TreeModel(
        root=Leaf(class_label="neg", distribution=[1.0, 1.0]),
        attributes=ds.attributes,
        classes=ds.classes,
        minority_label="neg",
        config=TreeConfig(),
    )
    test_cases = [
        {"weights": [0.75, 0.25], "expected": 0.75},
        {"weights": [3.0, 1.0], "expected": 0.75},
        {"weights": [0.0, 1.0], "expected": 0.0},
        {"weights": [1.0, 0.0], "expected": 1.0},
    ]
    for case in test_cases:
        assert weighted_accuracy(constant, ds, case["weights"]) == pytest.approx(case["expected"])


def test_separable_data_is_fit_exactly(separable):
    weights = np.full(separable.num_instances, 1.0 / separable.num_instances)
    model = fit_tree(separable, weights)
    assert weighted_accuracy(model, separable, weights) == 1.0


def test_zero_weight_rows_are_ignored():
    ds = numeric_dataset([1, 2, 3, 4, 5], [0, 0, 1, 1, 0])
    model = fit_tree(ds, [1.0, 1.0, 1.0, 1.0, 0.0], OPEN_CONFIG)
    assert model.root.threshold == 2.5
    assert sum(model.root.child_weights) == 4.0


def test_max_depth_zero_gives_majority_leaf(weather):
    model = fit_tree(weather, np.ones(14), TreeConfig(max_depth=0))
    assert isinstance(model.root, Leaf)
    assert model.root.class_label == "yes"
    assert model.root.distribution == [9.0, 5.0]
    assert model.minority_label == "no"


def test_leaf_ties_go_to_the_first_class():
    ds = numeric_dataset([[1.0], [1.0]], [1, 0])
    model = fit_tree(ds, [1.0, 1.0])
    assert isinstance(model.root, Leaf)
    assert model.root.class_label == "neg"


def test_render_tree():
    model = fit_tree(threshold_dataset(), np.full(4, 0.25))
    assert render_tree(model) == (
        "x0 <= 2.5: neg {neg=0.5, pos=0}\n" "x0 > 2.5: pos {neg=0, pos=0.5}"
    )
    leaf_only = fit_tree(numeric_dataset([[1.0]], [0]), [1.0])
    assert render_tree(leaf_only) == "neg {neg=1, pos=0}"


def test_render_nested_and_categorical_trees():
    assert render_tree(categorical_model([5.0, 1.0, 1.0])).splitlines() == [
        "colour = r: neg {neg=5, pos=0}",
        "colour = g: pos {neg=0, pos=1}",
        "colour = b: pos {neg=0, pos=1}",
    ]
    ds = numeric_dataset([1, 2, 3, 4, 5, 6], [0, 0, 1, 1, 0, 0])
    lines = render_tree(fit_tree(ds, np.ones(6), OPEN_CONFIG)).splitlines()
    assert lines[0].startswith("x0 ")
    assert any(line.startswith("|   x0 ") for line in lines)


def test_fit_errors():
    ds = threshold_dataset()
    test_cases = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
        [1.0, float("nan"), 1.0, 1.0],
    ]
    for weights in test_cases:
        with pytest.raises(DataError):
            fit_tree(ds, weights)
    model = fit_tree(ds, np.ones(4))
    with pytest.raises(DataError):
        predict_tree(model, [1.0, 2.0])
    with pytest.raises(DataError):
        predict_tree_batch(model, np.ones((2, 3)))


def _candidate_partitions(ds, rows):
    """Every numeric midpoint cut and categorical multiway split at a node."""
    for j, attribute in enumerate(ds.attributes):
        column = ds.values[rows, j]
        if attribute.kind == AttributeKind.numeric:
            distinct = np.unique(column)
            for low, high in zip(distinct, distinct[1:]):
                cut = (low + high) / 2.0
                yield [rows[column <= cut], rows[column > cut]]
        else:
            codes = np.unique(column)
            if codes.size >= 2:
                yield [rows[column == code] for code in codes]


def _stats(ds, weights, parts):
    children = [np.bincount(ds.labels[p], weights=weights[p], minlength=len(ds.classes)) for p in parts]
    return split_statistics(children)


def _check_node(node, ds, weights, rows):
    best_ratio, best_gain = -np.inf, 0.0
    for parts in _candidate_partitions(ds, rows):
        gain, split_info, ratio = _stats(ds, weights, parts)
        best_gain = max(best_gain, gain)
        if gain > 1e-12 and split_info >= 1e-12:
            best_ratio = max(best_ratio, ratio)

    if isinstance(node, Leaf):
        distribution = np.bincount(ds.labels[rows], weights=weights[rows], minlength=len(ds.classes))
        assert np.allclose(node.distribution, distribution)
        assert np.count_nonzero(distribution) <= 1 or best_gain <= 1e-9
        return

    column = ds.values[rows, node.attribute]
    if isinstance(node, NumericSplit):
        parts = [rows[column <= node.threshold], rows[column > node.threshold]]
    else:
        by_position = sorted(node.branches, key=node.branches.get)
        parts = [rows[column == code] for code in by_position]
    assert len(parts) >= 2
    _, _, chosen = _stats(ds, weights, parts)
    assert chosen >= best_ratio - 1e-9
    for child, part in zip(node.children, parts):
        _check_node(child, ds, weights, part)


def test_chosen_splits_match_exhaustive_enumeration():
    rng = np.random.default_rng(30)
    for trial in range(60):
        n = int(rng.integers(4, 21))
        p = int(rng.integers(1, 5))
        categorical = tuple(j for j in range(p) if rng.random() < 0.3)
        ds = random_dataset(rng, n, p, num_classes=int(rng.integers(2, 4)), categorical=categorical)
        weights = rng.uniform(0.1, 1.0, size=n)
        model = fit_tree(ds, weights, OPEN_CONFIG)
        _check_node(model.root, ds, weights, np.arange(n))


def _structure(node):
    if isinstance(node, Leaf):
        return node.class_label
    if isinstance(node, NumericSplit):
        return ("numeric", node.attribute, node.threshold, [_structure(c) for c in node.children])
    return ("categorical", node.attribute, node.branches, [_structure(c) for c in node.children])


def test_scaling_weights_keeps_the_tree():
    rng = np.random.default_rng(31)
    for _ in range(20):
        ds = random_dataset(rng, 20, 3, categorical=(1,))
        weights = rng.uniform(0.1, 1.0, size=20)
        reference = _structure(fit_tree(ds, weights).root)
        for factor in (0.125, 4.0):
            assert _structure(fit_tree(ds, weights * factor).root) == reference
