import numpy as np
import pytest

from app.helpers.dataset import parse_keel
from app.models.dataset import AttributeKind, AttributeSchema, Dataset

WEATHER_KEEL = """@relation weather
@attribute outlook {sunny, overcast, rainy}
@attribute temperature real [60.0, 90.0]
@attribute humidity real [60.0, 100.0]
@attribute windy {false, true}
@attribute play {yes, no}
@inputs outlook, temperature, humidity, windy
@outputs play
@data
sunny, 85, 85, false, no
sunny, 80, 90, true, no
overcast, 83, 86, false, yes
rainy, 70, 96, false, yes
rainy, 68, 80, false, yes
rainy, 65, 70, true, no
overcast, 64, 65, true, yes
sunny, 72, 95, false, no
sunny, 69, 70, false, yes
rainy, 75, 80, false, yes
sunny, 75, 70, true, yes
overcast, 72, 90, true, yes
overcast, 81, 75, false, yes
rainy, 71, 91, true, no
"""


@pytest.fixture
def weather():
    return parse_keel(WEATHER_KEEL)


def numeric_dataset(values, labels, classes=("neg", "pos"), name="synthetic"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return Dataset(
        name=name,
        attributes=[
            AttributeSchema(name=f"x{j}", kind=AttributeKind.numeric)
            for j in range(values.shape[1])
        ],
        classes=list(classes),
        values=values,
        labels=np.asarray(labels, dtype=int),
    )


@pytest.fixture
def two_clouds():
    """Two well separated Gaussian blobs of 20 points each, in that order."""
    rng = np.random.default_rng(3)
    left = rng.normal(loc=(-10.0, 0.0), scale=0.5, size=(20, 2))
    right = rng.normal(loc=(10.0, 0.0), scale=0.5, size=(20, 2))
    return np.vstack([left, right])


@pytest.fixture
def imbalanced():
    """60 negatives around the origin and 12 positives shifted along x0, with overlap."""
    rng = np.random.default_rng(11)
    negatives = rng.normal(loc=(0.0, 0.0), scale=1.0, size=(60, 2))
    positives = rng.normal(loc=(1.5, 0.5), scale=1.0, size=(12, 2))
    return numeric_dataset(
        np.vstack([negatives, positives]), [0] * 60 + [1] * 12, name="imbalanced"
    )


@pytest.fixture
def separable():
    """Positives strictly above x0 = 5, negatives strictly below."""
    rng = np.random.default_rng(5)
    negatives = rng.uniform(0.0, 4.0, size=(30, 2))
    positives = rng.uniform(6.0, 10.0, size=(10, 2))
    return numeric_dataset(
        np.vstack([negatives, positives]), [0] * 30 + [1] * 10, name="separable"
    )


def random_dataset(rng, n, p, num_classes=2, categorical=()):
    """Small mixed dataset; columns in ``categorical`` take 3 categories."""
    attributes, columns = [], []
    for j in range(p):
        if j in categorical:
            attributes.append(
                AttributeSchema(
                    name=f"c{j}", kind=AttributeKind.categorical, categories=["a", "b", "c"]
                )
            )
            columns.append(rng.integers(0, 3, size=n).astype(float))
        else:
            attributes.append(AttributeSchema(name=f"x{j}", kind=AttributeKind.numeric))
            # few distinct values so ties and repeated thresholds show up
            columns.append(rng.integers(0, 6, size=n).astype(float))
    labels = rng.integers(0, num_classes, size=n)
    labels[:num_classes] = np.arange(num_classes)
    return Dataset(
        name="random",
        attributes=attributes,
        classes=[f"k{c}" for c in range(num_classes)],
        values=np.column_stack(columns),
        labels=labels,
    )
