"""AdaBoost with a pluggable per-round sampling step.

One loop serves all four strategies: plain AdaBoost (no sampling), RUSBoost,
SMOTEBoost and CUSBoost. Weights live on the full training set; each round
fits a tree on that round's sample and is scored against every training
instance.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.helpers.dataset import binary_dataset
from app.helpers.kmeans import encode, kmeans_fit, select_num_clusters, sweep_k
from app.helpers.sampling import cus_sample, materialize, rus_sample, smote_sample
from app.helpers.tree import fit_tree, predict_tree_batch
from app.models.boosting import (
    ENSEMBLE_FORMAT_VERSION,
    BoostConfig,
    EnsembleModel,
    RoundRecord,
    Strategy,
)
from app.models.clustering import ClusterModel
from app.models.dataset import BinaryView, Dataset
from app.models.tree import TreeModel
from app.utils.errors import ConfigError, DataError, TrainingError
from app.utils.rng import derive_seed

logger = logging.getLogger(__name__)

# stands in for a zero error when capping the vote weight
ZERO_ERROR_EPSILON = 1e-10


def _mistakes(tree: TreeModel, ds: Dataset) -> np.ndarray:
    codes, _ = predict_tree_batch(tree, ds.values)
    if tree.classes == ds.classes:
        return codes != ds.labels
    predicted = np.array([ds.class_code(tree.classes[code]) for code in codes], dtype=np.int64)
    return predicted != ds.labels


def compute_error(tree: TreeModel, ds: Dataset, weights: Sequence[float]) -> float:
    """Sum of the weights of misclassified instances."""
    w = np.asarray(weights, dtype=np.float64)
    return float(w[_mistakes(tree, ds)].sum())


def _reweight(weights: np.ndarray, wrong: np.ndarray, error: float) -> np.ndarray:
    old_sum = weights.sum()
    updated = weights.copy()
    updated[~wrong] *= error / (1.0 - error)
    return updated * (old_sum / updated.sum())


def update_weights(
    weights: Sequence[float], tree: TreeModel, ds: Dataset, error: float
) -> np.ndarray:
    """Shrink correctly classified weights by error / (1 - error), then renormalise."""
    if not 0 < error < 0.5:
        raise ConfigError(f"weight update needs 0 < error < 0.5, got {error}")
    w = np.asarray(weights, dtype=np.float64)
    return _reweight(w, _mistakes(tree, ds), error)


def vote_weight(error: float) -> float:
    if error == 0:
        return math.log((1.0 - ZERO_ERROR_EPSILON) / ZERO_ERROR_EPSILON)
    return math.log((1.0 - error) / error)


def choose_num_clusters(view: BinaryView, cfg: BoostConfig) -> Tuple[int, List[Tuple[int, float]]]:
    """Inertia-elbow choice over the candidates that fit the majority side.

    k=1 is fitted first as the reference for the smallest candidate.
    """
    majority = len(view.majority_indices)
    candidates = sorted({1, *[k for k in cfg.cluster_candidates if k <= majority]})
    _, matrix = encode(view.base, view.majority_indices)
    sweep = sweep_k(
        matrix,
        candidates,
        derive_seed(cfg.seed, "sweep"),
        max_iters=cfg.kmeans_max_iters,
        tol=cfg.kmeans_tol,
    )
    return select_num_clusters(sweep), sweep


def cluster_majority(view: BinaryView, cfg: BoostConfig) -> ClusterModel:
    """k-means over the encoded majority rows, as training clusters them."""
    k = cfg.num_clusters
    if k is None:
        k, _ = choose_num_clusters(view, cfg)
        logger.info("Chose %d majority clusters by inertia elbow", k)
    if k > len(view.majority_indices):
        raise ConfigError(
            f"num_clusters ({k}) exceeds the majority size ({len(view.majority_indices)})"
        )
    _, matrix = encode(view.base, view.majority_indices)
    return kmeans_fit(
        matrix,
        k,
        derive_seed(cfg.seed, "kmeans"),
        max_iters=cfg.kmeans_max_iters,
        tol=cfg.kmeans_tol,
    )


def _draw(view: BinaryView, cfg: BoostConfig, clusters: Optional[ClusterModel], seed: int):
    if cfg.strategy == Strategy.cusboost:
        return cus_sample(view, clusters, cfg.fraction, seed)
    if cfg.strategy == Strategy.rusboost:
        return rus_sample(view, cfg.target_ratio, seed)
    if cfg.strategy == Strategy.smoteboost:
        return smote_sample(view, cfg.smote_amount, cfg.smote_neighbors, seed)
    return None


def _fit_round(binary: Dataset, weights: np.ndarray, plan, cfg: BoostConfig) -> TreeModel:
    if plan is None:
        return fit_tree(binary, weights, cfg.tree)
    sample = materialize(binary, plan)
    sample_weights = np.empty(sample.num_instances)
    real = sample.provenance >= 0
    sample_weights[real] = weights[sample.provenance[real]]
    sample_weights[~real] = 1.0 / sample.num_instances
    return fit_tree(sample, sample_weights, cfg.tree)


def train(ds: Dataset, view: BinaryView, cfg: BoostConfig) -> EnsembleModel:
    """Boost ``cfg.rounds`` trees over the binary view of ``ds``.

    A round whose weighted error reaches 0.5 is redrawn with a fresh sub-seed
    up to ``max_retries_per_round`` times; when the retries run out training
    stops with the rounds accepted so far. A zero-error round is accepted with
    a capped vote weight and the weights start over from uniform.
    """
    if view.base.num_instances != ds.num_instances:
        raise DataError("binary view does not belong to the training dataset")
    if ds.num_instances == 0:
        raise DataError("cannot train on an empty dataset")
    if not len(view.minority_indices) or not len(view.majority_indices):
        raise DataError("training data must contain both classes")

    binary = binary_dataset(view)
    n = binary.num_instances
    clusters = cluster_majority(view, cfg) if cfg.strategy == Strategy.cusboost else None

    weights = np.full(n, 1.0 / n)
    records: List[RoundRecord] = []
    for round_index in range(cfg.rounds):
        accepted = None
        for attempt in range(cfg.max_retries_per_round + 1):
            seed = derive_seed(cfg.seed, round_index, attempt)
            plan = _draw(view, cfg, clusters, seed)
            tree = _fit_round(binary, weights, plan, cfg)
            wrong = _mistakes(tree, binary)
            error = float(weights[wrong].sum())
            if error < 0.5:
                accepted = (seed, plan, tree, wrong, error, attempt)
                break
            logger.debug("Round %d attempt %d rejected, error %.4f", round_index, attempt, error)
            if plan is None:
                # without sampling a retry refits the same tree
                break
        if accepted is None:
            if not records:
                raise TrainingError(
                    f"no model with error below 0.5 after {cfg.max_retries_per_round} retries"
                )
            logger.warning(
                "Stopping after %d rounds: round %d exhausted its retries",
                len(records), round_index,
            )
            break

        seed, plan, tree, wrong, error, retries = accepted
        records.append(
            RoundRecord(
                round_index=round_index,
                seed=seed,
                plan=plan.summary() if plan is not None else None,
                tree=tree,
                error=error,
                vote_weight=vote_weight(error),
                retries=retries,
            )
        )
        if error == 0:
            weights = np.full(n, 1.0 / n)
        else:
            weights = _reweight(weights, wrong, error)

    return EnsembleModel(
        strategy=cfg.strategy,
        positive_label=view.positive_label,
        classes=binary.classes,
        attributes=binary.attributes,
        config=cfg,
        num_clusters=clusters.k if clusters is not None else None,
        rounds=records,
    )


def predict_batch(model: EnsembleModel, matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted-vote labels and positive vote shares for every row."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.attributes):
        raise DataError(f"instances must have {len(model.attributes)} values")
    positive = model.classes.index(model.positive_label)
    positive_votes = np.zeros(len(X))
    total = 0.0
    for record in model.rounds:
        codes, _ = predict_tree_batch(record.tree, X)
        positive_votes += record.vote_weight * (codes == positive)
        total += record.vote_weight
    negative_votes = total - positive_votes
    negative = 1 - positive
    # ties go to the positive class
    codes = np.where(positive_votes >= negative_votes, positive, negative)
    labels = np.array(model.classes, dtype=object)[codes]
    scores = positive_votes / total if total > 0 else np.zeros(len(X))
    return labels, scores


def predict(model: EnsembleModel, instance: Sequence[float]) -> Tuple[str, float]:
    labels, scores = predict_batch(model, np.asarray(instance, dtype=np.float64)[None, :])
    return str(labels[0]), float(scores[0])


def dump_ensemble(model: EnsembleModel) -> str:
    return model.model_dump_json(indent=2)


def load_ensemble(text: str) -> EnsembleModel:
    try:
        model = EnsembleModel.model_validate_json(text)
    except ValidationError as e:
        raise DataError(f"invalid ensemble file: {e}") from e
    if model.format_version != ENSEMBLE_FORMAT_VERSION:
        raise DataError(f"unsupported ensemble format version {model.format_version}")
    return model


def same_ensemble(a: EnsembleModel, b: EnsembleModel) -> bool:
    """True when both ensembles hold the same trees with the same errors and votes."""
    if a.positive_label != b.positive_label or len(a.rounds) != len(b.rounds):
        return False
    return all(
        x.tree == y.tree and x.error == y.error and x.vote_weight == y.vote_weight
        for x, y in zip(a.rounds, b.rounds)
    )


def make_config(**values) -> BoostConfig:
    """BoostConfig from keyword values; None entries fall back to the defaults."""
    try:
        return BoostConfig(**{key: value for key, value in values.items() if value is not None})
    except ValidationError as e:
        raise ConfigError(str(e)) from e
