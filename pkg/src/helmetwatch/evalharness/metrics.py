"""Detection accuracy, greedy matching, ROC and PR curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from ..detector import iou


class ScoredOutcome(NamedTuple):
    score: float
    label: bool


def accuracy(t: int, f: int) -> float:
    """``t / (t + f)``."""
    if t < 0 or f < 0:
        raise ValueError("counts must be non-negative")
    if t + f == 0:
        raise ValueError("accuracy undefined for t + f = 0")
    return t / (t + f)


def _sweep(outcomes: Sequence[ScoredOutcome]):
    """Cumulative (tp, fp) counts after each distinct score, highest first."""
    scores = np.array([o.score for o in outcomes], dtype=np.float64)
    labels = np.array([bool(o.label) for o in outcomes])
    if np.isnan(scores).any():
        raise ValueError("scores must not be NaN")
    order = np.argsort(-scores, kind="stable")
    s, l = scores[order], labels[order]
    tp = np.cumsum(l)
    fp = np.cumsum(~l)
    # keep the last index of each run of equal scores
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    return s[last], tp[last], fp[last], int(l.sum()), int((~l).sum())


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(outcomes: Sequence[ScoredOutcome]) -> RocCurve:
    """ROC over every distinct threshold (plus the origin) and its
    trapezoidal area, accumulated in integers so that it equals the pair
    count ``P(s+ > s-) + P(s+ = s-) / 2`` up to one final division."""
    outcomes = list(outcomes)
    thr, tp, fp, n_pos, n_neg = _sweep(outcomes) if outcomes else (None, None, None, 0, 0)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative")
    tp = np.r_[0, tp].astype(np.int64)
    fp = np.r_[0, fp].astype(np.int64)
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    return RocCurve(np.r_[np.inf, thr], fp / n_neg, tp / n_pos, auc)


@dataclass(frozen=True)
class PrCurve:
    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist()))


def pr_curve(outcomes: Sequence[ScoredOutcome]) -> PrCurve:
    """Precision and recall when accepting scores ``>= t`` for every
    distinct score ``t``, highest first (recall is non-decreasing)."""
    outcomes = list(outcomes)
    if not any(o.label for o in outcomes):
        raise ValueError("PR curve needs at least one positive")
    thr, tp, fp, n_pos, _ = _sweep(outcomes)
    return PrCurve(thr, tp / n_pos, tp / (tp + fp))


def _bbox(item):
    return item.bbox if hasattr(item, "bbox") else tuple(item)


def _score(item):
    return item.score if hasattr(item, "score") else 0.0


def match_pairs(dets: Sequence, truth: Sequence, iou_min: float = 0.5) -> List[Tuple[int, int]]:
    """Greedy one-to-one matching within one frame.

    Detections are visited by descending score (earlier index first on
    ties); each takes the unmatched truth box of highest IoU (lowest index
    on ties) if that IoU is at least ``iou_min``. Returns ``(det, truth)``
    index pairs in visiting order.
    """
    if not 0 < iou_min <= 1:
        raise ValueError("iou_min must be in (0, 1]")
    order = sorted(range(len(dets)), key=lambda i: (-_score(dets[i]), i))
    tboxes = [_bbox(t) for t in truth]
    free = [True] * len(truth)
    pairs = []
    for i in order:
        box = _bbox(dets[i])
        best, best_iou = -1, -1.0
        for j, tb in enumerate(tboxes):
            if free[j]:
                v = iou(box, tb)
                if v > best_iou:
                    best, best_iou = j, v
        if best >= 0 and best_iou >= iou_min:
            free[best] = False
            pairs.append((i, best))
    return pairs


def match_detections(dets: Sequence, truth: Sequence, iou_min: float = 0.5) -> Tuple[int, int, int]:
    """``(T, F, missed)`` for one frame under :func:`match_pairs`."""
    t = len(match_pairs(dets, truth, iou_min))
    return t, len(dets) - t, len(truth) - t


@dataclass
class EvalReport:
    t: int
    f: int
    missed: int
    acc_pd: float
    recall: float
    pedestrian_roc: RocCurve | None
    pedestrian_pr: PrCurve | None
    helmet_roc: RocCurve | None
    helmet_pr: PrCurve | None

    def summary(self) -> dict:
        return {
            "T": self.t, "F": self.f, "missed": self.missed,
            "acc_pd": self.acc_pd, "recall": self.recall,
            "pedestrian_auc": self.pedestrian_roc.auc if self.pedestrian_roc else None,
            "helmet_auc": self.helmet_roc.auc if self.helmet_roc else None,
        }


def evaluate(det_rows: Iterable, truth_rows: Iterable, iou_min: float = 0.5) -> EvalReport:
    """Score detections against ground truth, frame by frame.

    ``det_rows`` need ``frame_id``, ``bbox`` and ``score``; for the helmet
    curves they also need ``ratio`` (the winning-colour fraction). Truth
    rows need ``frame_id``, ``bbox`` and ``worn``. Pedestrian curves use the
    cascade score with matched = positive; helmet curves use the ratio of
    each matched detection against the truth's worn flag.
    """
    by_frame_d, by_frame_t = {}, {}
    for d in det_rows:
        by_frame_d.setdefault(int(d.frame_id), []).append(d)
    for g in truth_rows:
        by_frame_t.setdefault(int(g.frame_id), []).append(g)
    t = f = missed = 0
    ped, helm = [], []
    for fid in sorted(set(by_frame_d) | set(by_frame_t)):
        dets = by_frame_d.get(fid, [])
        gts = by_frame_t.get(fid, [])
        pairs = match_pairs(dets, gts, iou_min)
        matched = {i: j for i, j in pairs}
        t += len(pairs)
        f += len(dets) - len(pairs)
        missed += len(gts) - len(pairs)
        for i, d in enumerate(dets):
            ped.append(ScoredOutcome(float(d.score), i in matched))
            if i in matched and getattr(d, "ratio", None) is not None:
                helm.append(ScoredOutcome(float(d.ratio), bool(gts[matched[i]].worn)))

    def curves(outcomes):
        labels = {o.label for o in outcomes}
        roc = roc_auc(outcomes) if labels == {True, False} else None
        pr = pr_curve(outcomes) if True in labels else None
        return roc, pr

    p_roc, p_pr = curves(ped)
    h_roc, h_pr = curves(helm)
    return EvalReport(
        t, f, missed,
        acc_pd=accuracy(t, f) if t + f else float("nan"),
        recall=t / (t + missed) if t + missed else float("nan"),
        pedestrian_roc=p_roc, pedestrian_pr=p_pr, helmet_roc=h_roc, helmet_pr=h_pr,
    )
