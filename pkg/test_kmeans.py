import itertools

import numpy as np
import pytest

from conftest import numeric_dataset
from app.helpers.kmeans import (
    apply_encoding,
    cluster_sizes,
    encode,
    kmeans_fit,
    select_num_clusters,
    sweep_k,
)
from app.models.dataset import AttributeKind, AttributeSchema, Dataset
from app.utils.errors import ConfigError, DataError


def mixed_dataset():
    return Dataset(
        name="mixed",
        attributes=[
            AttributeSchema(name="x", kind=AttributeKind.numeric),
            AttributeSchema(name="c", kind=AttributeKind.categorical, categories=["a", "b", "c"]),
            AttributeSchema(name="flat", kind=AttributeKind.numeric),
        ],
        classes=["neg", "pos"],
        values=np.array([[1.0, 1.0, 5.0], [3.0, 0.0, 5.0]]),
        labels=np.array([0, 1]),
    )


def test_encode_standardises_and_one_hots():
    encoding, matrix = encode(mixed_dataset(), [0, 1])
    assert matrix.tolist() == [[-1.0, 0.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0, 0.0]]
    assert encoding.attributes[0].shift == 2.0
    assert encoding.attributes[0].scale == 1.0
    # zero variance keeps scale 1
    assert encoding.attributes[2].scale == 1.0
    assert encoding.width == 5


def test_encoding_applies_to_new_rows():
    encoding, _ = encode(mixed_dataset(), [0, 1])
    assert apply_encoding(encoding, np.array([[4.0, 2.0, 6.0]])).tolist() == [
        [2.0, 0.0, 0.0, 1.0, 1.0]
    ]


def test_encode_rejects_empty_selection():
    with pytest.raises(DataError):
        encode(mixed_dataset(), [])


def test_single_cluster_is_the_mean():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    model = kmeans_fit(X, 1, seed=5)
    assert np.allclose(model.centroids[0], X.mean(axis=0))
    assert model.inertia == pytest.approx(((X - X.mean(axis=0)) ** 2).sum())
    assert set(model.assignment.tolist()) == {0}


def test_two_clouds_are_separated(two_clouds):
    model = kmeans_fit(two_clouds, 2, seed=1)
    left, right = model.assignment[:20], model.assignment[20:]
    assert len(set(left.tolist())) == 1
    assert len(set(right.tolist())) == 1
    assert left[0] != right[0]


def test_far_clouds_beat_every_other_two_way_split():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(0, 1, size=(4, 2)), rng.normal(100, 1, size=(4, 2))])
    model = kmeans_fit(X, 2, seed=3)
    best = min(
        sum(((X[mask] - X[mask].mean(axis=0)) ** 2).sum() for mask in (labels == 0, labels == 1))
        for labels in (np.array(bits) for bits in itertools.product([0, 1], repeat=8))
        if 0 < sum(labels) < 8
    )
    assert model.inertia == pytest.approx(best)


def test_identical_rows_repair_empty_clusters():
    X = np.ones((6, 2))
    model = kmeans_fit(X, 4, seed=0)
    assert model.inertia == 0.0
    assert sorted(cluster_sizes(model)) == [1, 1, 1, 3]
    assert min(cluster_sizes(model)) >= 1


def test_inertia_history_does_not_increase():
    rng = np.random.default_rng(4)
    for trial in range(10):
        X = rng.normal(size=(60, 2)) * rng.uniform(0.5, 3.0, size=2)
        model = kmeans_fit(X, 5, seed=trial)
        history = model.inertia_history
        for before, after in zip(history, history[1:]):
            assert after <= before + 1e-9 * max(1.0, before)
        assert model.inertia <= history[-1] + 1e-9 * max(1.0, history[-1])


def test_final_assignment_is_nearest_centroid():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 3))
    model = kmeans_fit(X, 4, seed=2)
    d2 = ((X[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    assert np.array_equal(model.assignment, d2.argmin(axis=1))
    assert set(model.assignment.tolist()) == set(range(4))


def test_kmeans_is_deterministic():
    X = np.random.default_rng(7).normal(size=(40, 2))
    first, second = kmeans_fit(X, 3, seed=11), kmeans_fit(X, 3, seed=11)
    assert np.array_equal(first.assignment, second.assignment)
    assert np.array_equal(first.centroids, second.centroids)
    assert first.inertia_history == second.inertia_history


def test_permuted_rows_give_the_same_partition(two_clouds):
    order = np.random.default_rng(9).permutation(len(two_clouds))
    original = kmeans_fit(two_clouds, 2, seed=4)
    permuted = kmeans_fit(two_clouds[order], 2, seed=4)

    def partition(assignment, rows):
        return {frozenset(rows[assignment == j].tolist()) for j in range(2)}

    assert partition(original.assignment, np.arange(40)) == partition(permuted.assignment, order)


def test_kmeans_argument_errors():
    X = np.zeros((3, 2))
    test_cases = [
        {"k": 0},
        {"k": 4},
        {"k": 2, "max_iters": 0},
        {"k": 2, "tol": -1.0},
    ]
    for case in test_cases:
        with pytest.raises(ConfigError):
            kmeans_fit(X, seed=0, **case)


def test_sweep_k(two_clouds):
    assert sweep_k(two_clouds, [], seed=0) == []
    sweep = sweep_k(two_clouds, [1, 2], seed=0)
    assert [k for k, _ in sweep] == [1, 2]
    total = ((two_clouds - two_clouds.mean(axis=0)) ** 2).sum()
    assert sweep[0][1] == pytest.approx(total)
    assert sweep[1][1] < sweep[0][1]


def test_elbow_prefers_the_largest_relative_drop():
    test_cases = [
        {"sweep": [(1, 100.0), (2, 10.0), (3, 8.0), (5, 7.0)], "expected": 2},
        {"sweep": [(3, 8.0), (1, 100.0), (2, 60.0)], "expected": 3},
        {"sweep": [(4, 3.0)], "expected": 4},
    ]
    for case in test_cases:
        assert select_num_clusters(case["sweep"]) == case["expected"]


def test_elbow_on_two_clouds(two_clouds):
    ds = numeric_dataset(two_clouds, [0] * 20 + [1] * 20)
    _, matrix = encode(ds, np.arange(40))
    assert select_num_clusters(sweep_k(matrix, [1, 2, 3, 5], seed=0)) == 2
