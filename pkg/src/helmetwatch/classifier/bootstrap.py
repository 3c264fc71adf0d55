"""Bootstrap training with hard-negative mining.

Round 1 trains a linear SVM on the positives and ``negatives_per_round``
windows sampled uniformly from the negative images. Every later round scans
all negative images with the previous linear model, appends its false
positives (highest scores first, at most ``2 * negatives_per_round``) to the
negative set and retrains. After the last round the HIK stage is trained
on the same final sample set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..detector import ScanParams, full_frame_plan, plan_features, plan_linear_scores
from .hik import fit_hik
from .linear import fit_linear
from .models import CascadeModel, LinearModel, TrainConfig

log = logging.getLogger(__name__)


@dataclass
class RoundStats:
    round: int
    negatives: int
    false_positives: int
    added: int
    train_accuracy: float
    kkt_residual: float
    solver_iterations: int


@dataclass
class BootstrapResult:
    model: CascadeModel
    negatives: np.ndarray
    history: List[RoundStats] = field(default_factory=list)
    hik_kkt_residual: float = 0.0
    hard_example_scores: List[np.ndarray] = field(default_factory=list)


class WindowScanner:
    """Enumerates and scores candidate windows of negative images.

    The default uses the detector's full-frame grid at every pyramid level.
    """

    def __init__(self, params: Optional[ScanParams] = None):
        self.params = params or ScanParams()
        self._plans = {}

    def plan(self, image: np.ndarray):
        key = image.shape
        if key not in self._plans:
            self._plans[key] = full_frame_plan(image.shape, self.params)
        return self._plans[key]

    def count(self, image: np.ndarray) -> int:
        return len(self.plan(image))

    def features(self, image: np.ndarray, indices: Sequence[int]) -> np.ndarray:
        return plan_features(image, self.plan(image), indices)

    def candidates(self, image: np.ndarray, linear: LinearModel):
        """Indices of windows whose exact linear score is >= 0, with features."""
        fast, bound = plan_linear_scores(image, self.plan(image), linear)
        rough = np.flatnonzero(fast >= -bound)
        if rough.size == 0:
            return rough, np.zeros(0), np.zeros((0, linear.weights.size), dtype=np.int32)
        feats = self.features(image, rough)
        exact = linear.decision(feats)
        keep = exact >= 0.0
        return rough[keep], exact[keep], feats[keep]


def bootstrap_train(
    pos: np.ndarray,
    neg_pool: Sequence[np.ndarray],
    cfg: TrainConfig,
    scanner: Optional[WindowScanner] = None,
    progress: Optional[Callable[[RoundStats], None]] = None,
) -> BootstrapResult:
    pos = np.asarray(pos)
    if len(pos) == 0:
        raise ValueError("no positive samples")
    if len(neg_pool) == 0:
        raise ValueError("no negative images")
    scanner = scanner or WindowScanner()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    counts = np.array([scanner.count(img) for img in neg_pool], dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise ValueError("negative images are too small to hold a single window")
    k = min(cfg.negatives_per_round, total)
    picks = np.sort(rng.choice(total, size=k, replace=False))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    used = set()
    chunks = []
    for img_idx, img in enumerate(neg_pool):
        local = picks[(picks >= starts[img_idx]) & (picks < starts[img_idx] + counts[img_idx])] - starts[img_idx]
        if local.size:
            chunks.append(scanner.features(img, local))
            used.update((img_idx, int(i)) for i in local)
    negatives = np.concatenate(chunks) if chunks else np.zeros((0, pos.shape[1]), dtype=np.int32)
    if len(negatives) == 0:
        raise ValueError("no negatives could be sampled")

    result = BootstrapResult(model=None, negatives=negatives)
    fit = None
    for r in range(1, cfg.rounds + 1):
        added = 0
        n_fp = 0
        if r > 1:
            found = []
            for img_idx, img in enumerate(neg_pool):
                idx, scores, feats = scanner.candidates(img, fit.model)
                for i, s, f in zip(idx, scores, feats):
                    if (img_idx, int(i)) not in used:
                        found.append((-float(s), img_idx, int(i), f))
            n_fp = len(found)
            found.sort(key=lambda t: (t[0], t[1], t[2]))
            found = found[:2 * cfg.negatives_per_round]
            if found:
                used.update((t[1], t[2]) for t in found)
                negatives = np.concatenate([negatives, np.stack([t[3] for t in found])])
                result.hard_example_scores.append(np.array([-t[0] for t in found]))
            else:
                result.hard_example_scores.append(np.zeros(0))
            added = len(found)
        fit = fit_linear(pos, negatives, cfg)
        acc = _accuracy(fit.model, pos, negatives)
        stats = RoundStats(r, len(negatives), n_fp, added, acc, fit.kkt_residual, fit.iterations)
        result.history.append(stats)
        log.info("round %d: %d negatives (+%d of %d false positives), train acc %.4f",
                 r, len(negatives), added, n_fp, acc)
        if progress:
            progress(stats)

    hik_fit = fit_hik(pos, negatives, cfg)
    result.hik_kkt_residual = hik_fit.kkt_residual
    result.model = CascadeModel(linear=fit.model, hik=hik_fit.model)
    result.negatives = negatives
    return result


def _accuracy(model: LinearModel, pos: np.ndarray, neg: np.ndarray) -> float:
    correct = np.count_nonzero(model.decision(pos) >= 0) + np.count_nonzero(model.decision(neg) < 0)
    return correct / (len(pos) + len(neg))
