import logging
import math
from fractions import Fraction

import numpy as np
from sklearn.neighbors import NearestNeighbors

from app.helpers.kmeans import encode
from app.models.clustering import ClusterModel
from app.models.dataset import AttributeKind, BinaryView, Dataset
from app.models.sampling import SamplePlan, SamplingStrategy
from app.utils.errors import ConfigError, DataError
from app.utils.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)


def _seed_value(seed: SeedLike) -> int:
    return int(seed) if isinstance(seed, (int, np.integer)) else -1


def _decimal(value) -> Fraction:
    # the shortest decimal that reads back as the float
    return Fraction(str(value))


def round_half_up(value) -> int:
    """Nearest integer with halves rounded up, taking floats at their decimal value."""
    return math.floor(_decimal(value) + Fraction(1, 2))


def cus_keep_count(cluster_size: int, fraction: float) -> int:
    if cluster_size == 0:
        return 0
    kept = round_half_up(_decimal(fraction) * cluster_size)
    return min(cluster_size, max(1, kept))


def rus_keep_count(num_majority: int, num_minority: int, target_ratio: float) -> int:
    return min(num_majority, round_half_up(_decimal(target_ratio) * num_minority))


def cus_sample(
    view: BinaryView, clusters: ClusterModel, fraction: float, seed: SeedLike
) -> SamplePlan:
    """Cluster-based under-sampling.

    Keeps every minority instance and, from each majority cluster of size s,
    round-half-up(fraction * s) instances (at least one) drawn uniformly
    without replacement.
    """
    if len(clusters.assignment) != len(view.majority_indices):
        raise DataError(
            f"cluster model covers {len(clusters.assignment)} rows, "
            f"the majority side has {len(view.majority_indices)}"
        )
    if not 0 < fraction <= 1:
        raise ConfigError("fraction must be in (0, 1]")

    rng = make_rng(seed)
    selected = [view.minority_indices]
    kept_per_cluster = []
    for j in range(clusters.k):
        members = view.majority_indices[clusters.assignment == j]
        keep = cus_keep_count(members.size, fraction)
        kept_per_cluster.append(keep)
        if keep:
            selected.append(rng.choice(members, size=keep, replace=False))
    return SamplePlan(
        strategy=SamplingStrategy.cus,
        seed=_seed_value(seed),
        params={
            "fraction": fraction,
            "num_clusters": clusters.k,
            "kept_per_cluster": kept_per_cluster,
        },
        kept_indices=np.sort(np.concatenate(selected)),
    )


def rus_sample(view: BinaryView, target_ratio: float, seed: SeedLike) -> SamplePlan:
    if target_ratio < 1:
        raise ConfigError("target_ratio must be >= 1")
    rng = make_rng(seed)
    keep = rus_keep_count(
        len(view.majority_indices), len(view.minority_indices), target_ratio
    )
    chosen = rng.choice(view.majority_indices, size=keep, replace=False)
    return SamplePlan(
        strategy=SamplingStrategy.rus,
        seed=_seed_value(seed),
        params={"target_ratio": target_ratio},
        kept_indices=np.sort(np.concatenate([view.minority_indices, chosen])),
    )


def _neighbour_lists(space: np.ndarray, neighbors: int) -> list:
    search = NearestNeighbors(n_neighbors=neighbors + 1, algorithm="brute").fit(space)
    _, found = search.kneighbors(space)
    lists = []
    for i, row in enumerate(found):
        # duplicates can push a row's own index out of its result
        lists.append([int(j) for j in row if j != i][:neighbors])
    return lists


def smote_sample(
    view: BinaryView, amount_percent: int, neighbors: int, seed: SeedLike
) -> SamplePlan:
    """SMOTE over the minority class.

    Every minority instance p yields amount_percent / 100 synthetic rows:
    numeric attributes at p + u * (q - p) for a random neighbour q and
    u ~ U[0, 1); categorical attributes copy p. Neighbours are searched
    on the standardised numeric attributes.
    """
    ds = view.base
    minority = view.minority_indices
    if len(minority) < 2:
        raise DataError("SMOTE needs at least 2 minority instances")
    if amount_percent < 100 or amount_percent % 100:
        raise ConfigError("amount_percent must be a positive multiple of 100")
    if not 1 <= neighbors <= len(minority) - 1:
        raise ConfigError(
            f"neighbors must be in 1..{len(minority) - 1}, got {neighbors}"
        )

    encoding, encoded = encode(ds, minority)
    columns, offset = [], 0
    for attribute in encoding.attributes:
        if attribute.kind == AttributeKind.numeric:
            columns.append(offset)
        offset += attribute.width
    space = encoded[:, columns] if columns else np.zeros((len(minority), 1))
    candidates = _neighbour_lists(space, neighbors)

    numeric = np.array(
        [attribute.kind == AttributeKind.numeric for attribute in ds.attributes],
        dtype=bool,
    )
    points = ds.values[minority]
    rng = make_rng(seed)
    synthetic, pairs = [], []
    for i, base in enumerate(points):
        for _ in range(amount_percent // 100):
            q = candidates[i][int(rng.integers(len(candidates[i])))]
            u = float(rng.random())
            row = base.copy()
            row[numeric] = base[numeric] + u * (points[q][numeric] - base[numeric])
            synthetic.append(row)
            pairs.append((int(minority[i]), int(minority[q])))

    return SamplePlan(
        strategy=SamplingStrategy.smote,
        seed=_seed_value(seed),
        params={"amount_percent": amount_percent, "neighbors": neighbors},
        kept_indices=np.arange(ds.num_instances),
        synthetic_values=np.asarray(synthetic).reshape(len(synthetic), ds.num_features),
        synthetic_label=view.positive_label,
        synthetic_pairs=pairs,
    )


def materialize(ds: Dataset, plan: SamplePlan) -> Dataset:
    """Build the sampled dataset; ``provenance`` maps rows to parent rows (-1 synthetic)."""
    kept = plan.kept_indices
    if kept.size and (kept.min() < 0 or kept.max() >= ds.num_instances):
        raise DataError("sample plan refers to rows outside the dataset")
    values = ds.values[kept]
    labels = ds.labels[kept]
    provenance = kept
    if plan.num_synthetic:
        code = ds.class_code(plan.synthetic_label)
        values = np.vstack([values, plan.synthetic_values])
        labels = np.concatenate([labels, np.full(plan.num_synthetic, code)])
        provenance = np.concatenate([kept, np.full(plan.num_synthetic, -1)])
    return Dataset(
        name=ds.name,
        attributes=ds.attributes,
        classes=ds.classes,
        values=values,
        labels=labels,
        provenance=provenance,
    )
