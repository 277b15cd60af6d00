import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from app.models.clustering import AttributeEncoding, ClusterModel, FeatureEncoding
from app.models.dataset import AttributeKind, Dataset
from app.utils.errors import ConfigError, DataError
from app.utils.rng import SeedLike, derive_seed, make_rng

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-6


def encode(ds: Dataset, indices: Sequence[int]) -> Tuple[FeatureEncoding, np.ndarray]:
    """Standardise numeric attributes over ``indices`` and one-hot the categorical ones."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise DataError("cannot encode an empty selection")
    rows = ds.values[indices]
    attributes = []
    for j, attribute in enumerate(ds.attributes):
        if attribute.kind == AttributeKind.numeric:
            column = rows[:, j]
            std = float(column.std())
            attributes.append(
                AttributeEncoding(
                    kind=AttributeKind.numeric,
                    shift=float(column.mean()),
                    scale=std if std > 0 else 1.0,
                )
            )
        else:
            attributes.append(
                AttributeEncoding(
                    kind=AttributeKind.categorical, categories=attribute.categories
                )
            )
    encoding = FeatureEncoding(attributes=attributes)
    return encoding, apply_encoding(encoding, rows)


def apply_encoding(encoding: FeatureEncoding, rows: np.ndarray) -> np.ndarray:
    blocks = []
    for j, attribute in enumerate(encoding.attributes):
        column = rows[:, j]
        if attribute.kind == AttributeKind.numeric:
            blocks.append(((column - attribute.shift) / attribute.scale)[:, None])
        else:
            blocks.append(np.eye(len(attribute.categories))[column.astype(np.int64)])
    if not blocks:
        return np.empty((len(rows), 0))
    return np.hstack(blocks)


def _assign(X: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    distances = cdist(X, centroids, "sqeuclidean")
    # argmin keeps the lowest centroid index on ties
    labels = np.argmin(distances, axis=1)
    return labels, distances[np.arange(len(X)), labels]


def _plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    closest = cdist(X, X[chosen], "sqeuclidean")[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            index = int(rng.choice(n, p=closest / total))
        else:
            index = int(rng.integers(n))
        chosen.append(index)
        closest = np.minimum(closest, cdist(X, X[[index]], "sqeuclidean")[:, 0])
    return X[chosen].copy()


def _repair_empty(X, labels, d2, centroids, k):
    """Re-seed each empty cluster at the point farthest from its centroid."""
    counts = np.bincount(labels, minlength=k)
    if counts.min() > 0:
        return labels, d2, centroids
    labels, d2, centroids = labels.copy(), d2.copy(), centroids.copy()
    for j in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(counts[labels] > 1)
        point = donors[np.argmax(d2[donors])]
        counts[labels[point]] -= 1
        labels[point] = j
        counts[j] = 1
        centroids[j] = X[point]
        d2[point] = 0.0
    return labels, d2, centroids


def _means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k)
    return sums / counts[:, None]


def kmeans_fit(
    matrix: np.ndarray,
    k: int,
    seed: SeedLike,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Stops once the largest centroid shift is at most ``tol`` or after
    ``max_iters`` iterations. Empty clusters are re-seeded at the point
    farthest from its current centroid, so every cluster keeps at least one
    member.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("k-means expects a 2-D matrix")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > len(X):
        raise ConfigError(f"k ({k}) exceeds the number of rows ({len(X)})")
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if tol < 0:
        raise ConfigError("tol must be non-negative")

    rng = make_rng(seed)
    centroids = _plus_plus(X, k, rng)
    history: List[float] = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        labels, d2 = _assign(X, centroids)
        labels, d2, centroids = _repair_empty(X, labels, d2, centroids, k)
        history.append(float(d2.sum()))
        updated = _means(X, labels, k)
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if shift <= tol:
            break

    labels, d2 = _assign(X, centroids)
    labels, d2, centroids = _repair_empty(X, labels, d2, centroids, k)
    logger.debug("k-means k=%d converged after %d iterations", k, iterations)
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignment=labels,
        inertia=float(d2.sum()),
        iterations_run=iterations,
        inertia_history=history,
    )


def cluster_sizes(model: ClusterModel) -> List[int]:
    return np.bincount(model.assignment, minlength=model.k).tolist()


def sweep_k(
    matrix: np.ndarray,
    k_candidates: Sequence[int],
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> List[Tuple[int, float]]:
    """Fit one model per candidate, each from its own sub-seed of (seed, k)."""
    results = []
    for k in k_candidates:
        model = kmeans_fit(matrix, k, derive_seed(seed, k), max_iters, tol)
        results.append((k, model.inertia))
    return results


def select_num_clusters(sweep: Sequence[Tuple[int, float]]) -> int:
    """Inertia elbow: the k reached by the largest relative inertia drop.

    Entries are compared in increasing k; the first entry only serves as the
    reference for the second, so callers put k=1 first.
    """
    if not sweep:
        raise ConfigError("cannot select a cluster count from an empty sweep")
    ordered = sorted(sweep)
    if len(ordered) == 1:
        return ordered[0][0]
    best_k, best_drop = ordered[1][0], -1.0
    for (_, previous), (k, inertia) in zip(ordered, ordered[1:]):
        drop = (previous - inertia) / previous if previous > 0 else 0.0
        if drop > best_drop:
            best_k, best_drop = k, drop
    return best_k
