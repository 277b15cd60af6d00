import logging
from typing import List, Sequence, Tuple

import numpy as np

from app.models.metrics import ConfusionCounts, RocCurve
from app.utils.errors import DataError, UndefinedRateError

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


def confusion(labels: Sequence, predictions: Sequence, positive_label) -> ConfusionCounts:
    if len(labels) != len(predictions):
        raise DataError(
            f"{len(labels)} labels but {len(predictions)} predictions"
        )
    actual = np.asarray(labels, dtype=object) == positive_label
    predicted = np.asarray(predictions, dtype=object) == positive_label
    return ConfusionCounts(
        tp=int(np.sum(actual & predicted)),
        fp=int(np.sum(~actual & predicted)),
        tn=int(np.sum(~actual & ~predicted)),
        fn=int(np.sum(actual & ~predicted)),
    )


def tp_rate(counts: ConfusionCounts) -> float:
    if counts.tp + counts.fn == 0:
        raise UndefinedRateError("TP rate is undefined without positive instances")
    return counts.tp / (counts.tp + counts.fn)


def fp_rate(counts: ConfusionCounts) -> float:
    if counts.fp + counts.tn == 0:
        raise UndefinedRateError("FP rate is undefined without negative instances")
    return counts.fp / (counts.fp + counts.tn)


def _split(labels, scores, positive_label) -> Tuple[np.ndarray, np.ndarray]:
    if len(labels) != len(scores):
        raise DataError(f"{len(labels)} labels but {len(scores)} scores")
    positive = np.asarray(labels, dtype=object) == positive_label
    values = np.asarray(scores, dtype=np.float64)
    if positive.all() or not positive.any():
        raise UndefinedRateError("ROC needs at least one positive and one negative instance")
    return positive, values


def roc_curve(labels: Sequence, scores: Sequence[float], positive_label) -> RocCurve:
    """ROC points over descending distinct scores.

    Instances sharing a score move the curve in one diagonal step. The
    trapezoid area is accumulated in counts and divided by P * N once.
    """
    positive, values = _split(labels, scores, positive_label)
    order = np.argsort(-values, kind="stable")
    ordered, hits = values[order], positive[order]
    # last position of each run of equal scores
    ends = np.flatnonzero(np.append(ordered[1:] != ordered[:-1], True))
    tp = np.concatenate([[0], np.cumsum(hits)[ends]])
    fp = np.concatenate([[0], np.cumsum(~hits)[ends]])
    num_pos, num_neg = int(tp[-1]), int(fp[-1])

    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    points = [(f / num_neg, t / num_pos) for f, t in zip(fp.tolist(), tp.tolist())]
    return RocCurve(points=points, auc=twice_area / (2 * num_pos * num_neg))


def auc_pairwise_oracle(labels: Sequence, scores: Sequence[float], positive_label) -> float:
    """Share of (positive, negative) pairs ranked correctly, ties counting half."""
    positive, values = _split(labels, scores, positive_label)
    pos, neg = values[positive], values[~positive]
    diff = pos[:, None] - neg[None, :]
    wins = 2 * int(np.sum(diff > 0)) + int(np.sum(diff == 0))
    return wins / (2 * pos.size * neg.size)


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def roc_convex_hull(curve: RocCurve) -> List[Point]:
    """Upper convex hull of the curve's points together with (0,0) and (1,1)."""
    points = sorted(set(curve.points) | {(0.0, 0.0), (1.0, 1.0)})
    hull: List[Point] = []
    # walk right to left so the kept chain is the upper one
    for point in reversed(points):
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], point) <= 0:
            hull.pop()
        hull.append(point)
    hull.reverse()
    return hull


def hull_auc(hull: Sequence[Point]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(hull, hull[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def export_roc(curve: RocCurve) -> str:
    lines = ["fp_rate,tp_rate"]
    lines.extend(f"{f!r},{t!r}" for f, t in curve.points)
    return "\n".join(lines) + "\n"
