"""Weighted C4.5-style decision trees.

Splits maximise the weighted gain ratio. Numeric attributes are cut at the
midpoints between consecutive distinct values (values <= threshold go
left); categorical attributes split multiway over the categories observed at
the node. Trees are grown without pruning.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.dataset import AttributeKind, Dataset
from app.models.tree import CategoricalSplit, Leaf, NumericSplit, TreeConfig, TreeModel
from app.utils.errors import DataError

logger = logging.getLogger(__name__)

# split information below this is treated as zero and the candidate skipped
MIN_SPLIT_INFO = 1e-12
# a split must gain more than this
MIN_GAIN = 1e-12
# gain ratios closer than this count as tied; the earlier candidate wins
TIE_EPS = 1e-12


def _entropy(weights: np.ndarray) -> np.ndarray:
    """Entropy (bits) of the class distributions along the last axis."""
    totals = weights.sum(axis=-1, keepdims=True)
    p = weights / np.where(totals > 0, totals, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _scores(children: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gain, split information and gain ratio for candidate partitions.

    ``children`` has shape (..., branches, classes) and holds the class
    weights that each branch receives.
    """
    parent = children.sum(axis=-2)
    total = parent.sum(axis=-1)
    branch = children.sum(axis=-1)
    share = branch / np.where(total > 0, total, 1.0)[..., None]
    gain = _entropy(parent) - (share * _entropy(children)).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        split_info = np.where(
            share > 0, -share * np.log2(np.where(share > 0, share, 1.0)), 0.0
        ).sum(axis=-1)
        ratio = np.where(
            (split_info >= MIN_SPLIT_INFO) & (gain > MIN_GAIN),
            gain / np.where(split_info > 0, split_info, 1.0),
            -np.inf,
        )
    return gain, split_info, ratio


def split_statistics(child_class_weights) -> Tuple[float, float, float]:
    """(information gain, split information, gain ratio) of one partition."""
    children = np.asarray(child_class_weights, dtype=np.float64)
    total = children.sum()
    share = children.sum(axis=1) / total
    gain = float(_entropy(children.sum(axis=0)) - (share * _entropy(children)).sum())
    split_info = float(-(share[share > 0] * np.log2(share[share > 0])).sum())
    ratio = gain / split_info if split_info >= MIN_SPLIT_INFO else 0.0
    return gain, split_info, ratio


class _Candidate:
    __slots__ = ("attribute", "ratio", "threshold", "categories", "partition")

    def __init__(self, attribute, ratio, threshold=None, categories=None, partition=None):
        self.attribute = attribute
        self.ratio = ratio
        self.threshold = threshold
        self.categories = categories
        self.partition = partition


class _Grower:
    def __init__(self, ds: Dataset, weights: np.ndarray, cfg: TreeConfig, floor: float):
        self.X = ds.values
        self.y = ds.labels
        self.w = weights
        self.attributes = ds.attributes
        self.classes = ds.classes
        self.num_classes = len(ds.classes)
        self.cfg = cfg
        self.floor = floor

    def _distribution(self, rows: np.ndarray) -> np.ndarray:
        return np.bincount(self.y[rows], weights=self.w[rows], minlength=self.num_classes)

    def _one_hot(self, rows: np.ndarray) -> np.ndarray:
        matrix = np.zeros((rows.size, self.num_classes))
        matrix[np.arange(rows.size), self.y[rows]] = self.w[rows]
        return matrix

    def _numeric(self, j: int, rows: np.ndarray, parent: np.ndarray) -> Optional[_Candidate]:
        column = self.X[rows, j]
        order = np.argsort(column, kind="stable")
        ordered = column[order]
        cuts = np.flatnonzero(ordered[1:] > ordered[:-1])
        if cuts.size == 0:
            return None
        left = np.cumsum(self._one_hot(rows[order]), axis=0)[cuts]
        right = np.maximum(parent - left, 0.0)
        left_weight, right_weight = left.sum(axis=1), right.sum(axis=1)
        admissible = (
            (left_weight >= self.floor)
            & (right_weight >= self.floor)
            & (left_weight > 0)
            & (right_weight > 0)
        )
        if not admissible.any():
            return None
        _, _, ratio = _scores(np.stack([left, right], axis=1))
        ratio = np.where(admissible, ratio, -np.inf)
        best = ratio.max()
        if not np.isfinite(best):
            return None
        position = int(np.flatnonzero(ratio >= best - TIE_EPS)[0])
        cut = cuts[position]
        threshold = (ordered[cut] + ordered[cut + 1]) / 2.0
        return _Candidate(j, float(ratio[position]), threshold=float(threshold))

    def _categorical(self, j: int, rows: np.ndarray) -> Optional[_Candidate]:
        codes = self.X[rows, j].astype(np.int64)
        observed = np.unique(codes)
        if observed.size < 2:
            return None
        children = np.stack([self._distribution(rows[codes == code]) for code in observed])
        branch_weight = children.sum(axis=1)
        if (branch_weight >= self.floor).sum() < 2:
            return None
        _, _, ratio = _scores(children)
        if not np.isfinite(ratio):
            return None
        return _Candidate(
            j, float(ratio), categories=observed.tolist(), partition=codes
        )

    def _best_split(self, rows: np.ndarray, parent: np.ndarray) -> Optional[_Candidate]:
        best = None
        for j, attribute in enumerate(self.attributes):
            if attribute.kind == AttributeKind.numeric:
                candidate = self._numeric(j, rows, parent)
            else:
                candidate = self._categorical(j, rows)
            if candidate is not None and (best is None or candidate.ratio > best.ratio + TIE_EPS):
                best = candidate
        return best

    def grow(self, rows: np.ndarray, depth: int):
        distribution = self._distribution(rows)
        leaf = Leaf(
            class_label=self.classes[int(np.argmax(distribution))],
            distribution=distribution.tolist(),
        )
        if np.count_nonzero(distribution) <= 1:
            return leaf
        if self.cfg.max_depth is not None and depth >= self.cfg.max_depth:
            return leaf
        if distribution.sum() < 2 * self.floor:
            return leaf

        best = self._best_split(rows, distribution)
        if best is None or best.ratio < self.cfg.min_split_gain_ratio:
            return leaf

        if best.threshold is not None:
            goes_left = self.X[rows, best.attribute] <= best.threshold
            parts = [rows[goes_left], rows[~goes_left]]
            return NumericSplit(
                attribute=best.attribute,
                threshold=best.threshold,
                children=[self.grow(part, depth + 1) for part in parts],
                child_weights=[float(self.w[part].sum()) for part in parts],
            )
        parts = [rows[best.partition == code] for code in best.categories]
        return CategoricalSplit(
            attribute=best.attribute,
            branches={code: position for position, code in enumerate(best.categories)},
            children=[self.grow(part, depth + 1) for part in parts],
            child_weights=[float(self.w[part].sum()) for part in parts],
        )


def fit_tree(ds: Dataset, weights: Sequence[float], cfg: TreeConfig = TreeConfig()) -> TreeModel:
    """Grow a tree on ``ds`` with one non-negative weight per instance."""
    if ds.num_instances == 0:
        raise DataError("cannot fit a tree on an empty dataset")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (ds.num_instances,):
        raise DataError(f"expected {ds.num_instances} weights, got {w.shape[0] if w.ndim else 0}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise DataError("all instance weights are zero")

    min_leaf = cfg.min_leaf_weight if cfg.min_leaf_weight is not None else 2.0 / ds.num_instances
    floor = min_leaf * float(w.sum())

    counts = np.bincount(ds.labels, minlength=len(ds.classes)).astype(np.float64)
    counts[counts == 0] = np.inf
    minority = ds.classes[int(np.argmin(counts))]

    grower = _Grower(ds, w, cfg, floor)
    root = grower.grow(np.flatnonzero(w > 0), depth=0)
    return TreeModel(
        root=root,
        attributes=ds.attributes,
        classes=ds.classes,
        minority_label=minority,
        config=cfg,
    )


def _leaf_score(leaf: Leaf, code: int) -> float:
    total = sum(leaf.distribution)
    return leaf.distribution[code] / total if total > 0 else 0.0


def _fallback_child(node: CategoricalSplit) -> int:
    # unseen category: heaviest child, lowest position on ties
    return int(np.argmax(node.child_weights))


def _check_width(model: TreeModel, width: int):
    if width != len(model.attributes):
        raise DataError(
            f"instance has {width} values, the tree expects {len(model.attributes)}"
        )


def predict_tree(model: TreeModel, instance: Sequence[float]) -> Tuple[str, float]:
    """Class label and minority-class weight fraction at the reached leaf."""
    row = np.asarray(instance, dtype=np.float64)
    _check_width(model, row.shape[0])
    node = model.root
    while not isinstance(node, Leaf):
        value = row[node.attribute]
        if isinstance(node, NumericSplit):
            node = node.children[0 if value <= node.threshold else 1]
        else:
            position = node.branches.get(int(value))
            if position is None:
                position = _fallback_child(node)
            node = node.children[position]
    return node.class_label, _leaf_score(node, model.classes.index(model.minority_label))


def predict_tree_batch(model: TreeModel, matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Class codes and minority scores for every row of ``matrix``."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("expected a 2-D matrix of instances")
    _check_width(model, X.shape[1])
    codes = np.empty(len(X), dtype=np.int64)
    scores = np.empty(len(X), dtype=np.float64)
    minority = model.classes.index(model.minority_label)

    def route(node, rows):
        if rows.size == 0:
            return
        if isinstance(node, Leaf):
            codes[rows] = model.classes.index(node.class_label)
            scores[rows] = _leaf_score(node, minority)
            return
        column = X[rows, node.attribute]
        if isinstance(node, NumericSplit):
            goes_left = column <= node.threshold
            route(node.children[0], rows[goes_left])
            route(node.children[1], rows[~goes_left])
            return
        fallback = _fallback_child(node)
        positions = np.array(
            [node.branches.get(int(value), fallback) for value in column], dtype=np.int64
        )
        for position, child in enumerate(node.children):
            route(child, rows[positions == position])

    route(model.root, np.arange(len(X)))
    return codes, scores


def weighted_accuracy(model: TreeModel, ds: Dataset, weights: Sequence[float]) -> float:
    """1 - weighted error, with the weights normalised to sum to one."""
    w = np.asarray(weights, dtype=np.float64)
    codes, _ = predict_tree_batch(model, ds.values)
    predicted = np.array([ds.class_code(model.classes[code]) for code in codes], dtype=np.int64)
    wrong = predicted != ds.labels
    return float(1.0 - w[wrong].sum() / w.sum())


def _distribution_text(model: TreeModel, leaf: Leaf) -> str:
    parts = ", ".join(
        f"{label}={weight:.6g}" for label, weight in zip(model.classes, leaf.distribution)
    )
    return f"{leaf.class_label} {{{parts}}}"


def render_tree(model: TreeModel) -> str:
    """Nested text form: one line per branch, '|   ' per level."""
    if isinstance(model.root, Leaf):
        return _distribution_text(model, model.root)
    lines: List[str] = []

    def walk(node, depth):
        pad = "|   " * depth
        attribute = model.attributes[node.attribute]
        if isinstance(node, NumericSplit):
            conditions = [
                f"{attribute.name} <= {node.threshold:.6g}",
                f"{attribute.name} > {node.threshold:.6g}",
            ]
        else:
            by_position = {position: code for code, position in node.branches.items()}
            conditions = [
                f"{attribute.name} = {attribute.categories[by_position[p]]}"
                for p in range(len(node.children))
            ]
        for condition, child in zip(conditions, node.children):
            if isinstance(child, Leaf):
                lines.append(f"{pad}{condition}: {_distribution_text(model, child)}")
            else:
                lines.append(f"{pad}{condition}")
                walk(child, depth + 1)

    walk(model.root, 0)
    return "\n".join(lines)
