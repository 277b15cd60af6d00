import logging

import numpy as np
import pytest

from conftest import WEATHER_KEEL, numeric_dataset
from app.helpers.dataset import (
    binarize,
    binary_dataset,
    load_dataset,
    parse_delimited,
    parse_file,
    parse_keel,
    stratified_folds,
    subset,
    summarize,
    write_keel,
)
from app.models.dataset import AttributeKind
from app.utils.errors import ConfigError, DataError, ParseError

SMALL_KEEL = """@relation small
@attribute a real [0.0, 10.0]
@attribute b real [0.0, 10.0]
@attribute Class {pos, neg}
@inputs a, b
@outputs Class
@data
1.0, 2.0, pos
3.0, 4.0, neg
5.0, 6.0, neg
"""


def test_parse_keel_structure():
    ds = parse_keel(SMALL_KEEL.encode("utf-8"))
    assert ds.name == "small"
    assert ds.num_instances == 3
    assert ds.num_features == 2
    assert ds.classes == ["pos", "neg"]
    assert ds.labels.tolist() == [0, 1, 1]
    assert ds.attributes[0].range == (0.0, 10.0)


def test_parse_keel_weather(weather):
    assert weather.num_instances == 14
    assert [a.name for a in weather.attributes] == ["outlook", "temperature", "humidity", "windy"]
    assert weather.attributes[0].kind == AttributeKind.categorical
    assert weather.attributes[0].categories == ["sunny", "overcast", "rainy"]
    assert weather.values[2].tolist() == [1.0, 83.0, 86.0, 0.0]
    assert summarize(weather).class_counts == {"yes": 9, "no": 5}


def test_keywords_are_case_insensitive_and_comments_skipped():
    text = "% a comment\n@RELATION r\n@Attribute x REAL\n@ATTRIBUTE y {u,v}\n@DATA\n% more\n1,u\n2,v\n"
    ds = parse_keel(text)
    assert ds.num_instances == 2
    assert ds.classes == ["u", "v"]


def test_last_attribute_is_the_label_without_outputs():
    text = "@relation r\n@attribute x real\n@attribute y {u,v}\n@data\n1, u\n2,v\n"
    ds = parse_keel(text)
    assert ds.num_features == 1
    assert ds.labels.tolist() == [0, 1]


def test_parse_keel_errors():
    header = "@relation r\n@attribute a real\n@attribute b real\n@attribute c {p,n}\n@data\n"
    test_cases = [
        {"name": "arity", "input": header + "1.0, 2.0, p\n1.0, 2.0\n", "line": 7},
        {"name": "missing value", "input": header + "?, 2.0, p\n", "line": 6},
        {"name": "unknown class", "input": header + "1.0, 2.0, q\n", "line": 6},
        {"name": "non-numeric", "input": header + "1.0, abc, p\n", "line": 6},
        {"name": "malformed header", "input": "@relation r\n@attribut a real\n@data\n", "line": 2},
        {"name": "unknown type", "input": "@relation r\n@attribute a text\n@data\n", "line": 2},
    ]
    for case in test_cases:
        with pytest.raises(ParseError) as info:
            parse_keel(case["input"])
        assert info.value.line == case["line"], case["name"]
        assert f"line {case['line']}" in str(info.value)


def test_unknown_category_is_rejected():
    text = "@relation r\n@attribute a {x,y}\n@attribute c {p,n}\n@data\nz, p\n"
    with pytest.raises(ParseError, match="unknown category"):
        parse_keel(text)


def test_missing_data_section():
    with pytest.raises(ParseError):
        parse_keel("@relation r\n@attribute a real\n@attribute c {p,n}\n")


def test_out_of_range_values_are_kept_with_a_warning(caplog):
    text = "@relation r\n@attribute a real [0.0, 1.0]\n@attribute c {p,n}\n@data\n5.0, p\n0.5, n\n"
    with caplog.at_level(logging.WARNING):
        ds = parse_keel(text)
    assert ds.values[:, 0].tolist() == [5.0, 0.5]
    assert "outside the declared range" in caplog.text


def test_keel_round_trip(weather):
    again = parse_keel(write_keel(weather))
    assert again.attributes == weather.attributes
    assert again.classes == weather.classes
    assert np.array_equal(again.values, weather.values)
    assert np.array_equal(again.labels, weather.labels)


def test_keel_round_trip_keeps_awkward_floats():
    ds = numeric_dataset([[0.1], [1e-17], [123456.789012345]], [0, 1, 0])
    again = parse_keel(write_keel(ds))
    assert np.array_equal(again.values, ds.values)


def test_keel_round_trip_keeps_quoted_names():
    ds = parse_delimited("my x,label\n1,a\n2,b\n3,a")
    assert ds.attributes[0].name == "my x"
    text = write_keel(ds)
    assert "@inputs 'my x'" in text
    again = parse_keel(text)
    assert again.attributes == ds.attributes
    assert again.classes == ds.classes
    assert np.array_equal(again.values, ds.values)
    assert np.array_equal(again.labels, ds.labels)


def test_parse_delimited_infers_columns():
    ds = parse_delimited("1,2,a\n3,4,b")
    assert ds.num_instances == 2
    assert ds.num_features == 2
    assert all(a.kind == AttributeKind.numeric for a in ds.attributes)
    assert ds.classes == ["a", "b"]


def test_parse_delimited_detects_header():
    ds = parse_delimited("x,y\n1,2")
    assert ds.num_instances == 1
    assert ds.num_features == 1
    assert ds.attributes[0].name == "x"


def test_parse_delimited_categorical_columns():
    ds = parse_delimited("red;1.5;yes\nblue;2.5;no\nred;0.5;no\n", delimiter=";")
    assert ds.attributes[0].kind == AttributeKind.categorical
    assert ds.attributes[0].categories == ["red", "blue"]
    assert ds.values[:, 0].tolist() == [0.0, 1.0, 0.0]


def test_parse_delimited_label_column():
    ds = parse_delimited("a,1,2\nb,3,4\n", label_column=0)
    assert ds.classes == ["a", "b"]
    assert ds.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_parse_delimited_errors():
    for text in ["1,2\n3", "", "   \n"]:
        with pytest.raises(ParseError):
            parse_delimited(text)


def test_parse_file_rejects_single_class():
    with pytest.raises(DataError):
        parse_file(b"1,2,a\n3,4,a\n", "one.csv")


def test_load_dataset_by_path(tmp_path):
    path = tmp_path / "small.dat"
    path.write_text(SMALL_KEEL)
    assert load_dataset(str(path)).num_instances == 3
    csv = tmp_path / "table.csv"
    csv.write_text("1;2;a\n3;4;b\n")
    assert load_dataset(str(csv)).num_features == 2


def test_load_dataset_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_dataset(str(tmp_path / "absent.dat"))


def test_load_dataset_unreadable_path(tmp_path):
    (tmp_path / "folder.dat").mkdir()
    with pytest.raises(DataError, match="cannot read dataset"):
        load_dataset(str(tmp_path / "folder.dat"))


def test_summarize():
    test_cases = [
        {"labels": [0] * 5 + [1] * 5, "classes": ["a", "b"], "ratio": 1.0},
        {"labels": [0] * 900 + [1] * 90 + [2] * 10, "classes": ["a", "b", "c"], "ratio": 90.0},
        {"labels": [0] * 500 + [1] * 268, "classes": ["neg", "pos"], "ratio": 500 / 268},
    ]
    for case in test_cases:
        ds = numeric_dataset(np.zeros(len(case["labels"])), case["labels"], case["classes"])
        summary = summarize(ds)
        assert summary.imbalance_ratio == pytest.approx(case["ratio"])
        assert sum(summary.class_counts.values()) == summary.num_instances


def test_binarize_picks_the_rarest_label():
    ds = numeric_dataset(np.zeros(4), [0, 0, 0, 1], ["a", "b"])
    view = binarize(ds)
    assert view.positive_label == "b"
    assert view.minority_indices.tolist() == [3]
    assert not view.warning


def test_binarize_tie_goes_to_first_declared():
    ds = numeric_dataset(np.zeros(2), [0, 1], ["a", "b"])
    assert binarize(ds).positive_label == "a"


def test_binarize_explicit_majority_sets_warning(caplog):
    ds = numeric_dataset(np.zeros(3), [0, 0, 1], ["a", "b"])
    with caplog.at_level(logging.WARNING):
        view = binarize(ds, "a")
    assert len(view.minority_indices) == 2
    assert view.warning
    assert "positive label" in caplog.text


def test_binarize_errors():
    ds = numeric_dataset(np.zeros(3), [0, 0, 0], ["a", "b"])
    with pytest.raises(DataError):
        binarize(ds, "a")
    with pytest.raises(DataError):
        binarize(ds, "b")
    with pytest.raises(DataError):
        binarize(ds, "zzz")


def test_binary_dataset_maps_the_rest():
    ds = numeric_dataset(np.zeros(6), [0, 0, 0, 1, 1, 2], ["a", "b", "c"])
    binary = binary_dataset(binarize(ds))
    assert binary.classes == ["c", "rest"]
    assert binary.label_values == ["rest"] * 5 + ["c"]


def test_binary_dataset_keeps_two_class_order():
    ds = numeric_dataset(np.zeros(4), [0, 0, 0, 1], ["neg", "pos"])
    binary = binary_dataset(binarize(ds))
    assert binary.classes == ["neg", "pos"]
    assert np.array_equal(binary.labels, ds.labels)


def test_subset_records_provenance(weather):
    part = subset(weather, [3, 1, 4])
    assert part.provenance.tolist() == [3, 1, 4]
    assert np.array_equal(part.values, weather.values[[3, 1, 4]])


def test_stratified_folds_exact_split():
    ds = numeric_dataset(np.zeros(100), [0] * 90 + [1] * 10)
    plan = stratified_folds(ds, 10, seed=4)
    for fold in range(10):
        test = plan.test_indices(fold)
        assert (ds.labels[test] == 0).sum() == 9
        assert (ds.labels[test] == 1).sum() == 1


def test_stratified_fold_sizes():
    ds = numeric_dataset(np.zeros(10), [0] * 6 + [1] * 4)
    plan = stratified_folds(ds, 3, seed=1)
    sizes = sorted(len(plan.test_indices(f)) for f in range(3))
    assert sizes == [3, 3, 4]


def test_stratified_folds_invariants():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = int(rng.integers(12, 80))
        labels = rng.integers(0, 3, size=n)
        labels[:3] = [0, 1, 2]
        ds = numeric_dataset(np.zeros(n), labels, ["a", "b", "c"])
        folds = int(rng.integers(2, 6))
        plan = stratified_folds(ds, folds, seed=int(rng.integers(1000)))
        assert set(plan.fold_assignment.tolist()) <= set(range(folds))
        for code in range(3):
            per_fold = [
                int((ds.labels[plan.test_indices(f)] == code).sum()) for f in range(folds)
            ]
            assert max(per_fold) - min(per_fold) <= 1
        covered = np.concatenate([plan.test_indices(f) for f in range(folds)])
        assert sorted(covered.tolist()) == list(range(n))


def test_stratified_folds_are_deterministic():
    ds = numeric_dataset(np.zeros(30), [0] * 20 + [1] * 10)
    first = stratified_folds(ds, 5, seed=9)
    second = stratified_folds(ds, 5, seed=9)
    assert np.array_equal(first.fold_assignment, second.fold_assignment)


def test_stratified_folds_errors():
    ds = numeric_dataset(np.zeros(4), [0, 0, 1, 1])
    with pytest.raises(ConfigError):
        stratified_folds(ds, 1, seed=0)
    with pytest.raises(ConfigError):
        stratified_folds(ds, 5, seed=0)
