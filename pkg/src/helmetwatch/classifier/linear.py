"""Linear soft-margin SVM trained by dual coordinate descent.

Features are divided by their RMS norm before solving, so ``c`` does not
depend on the magnitude of the histograms. The bias is learned as the
weight of a constant extra feature equal to 1 on that scale.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .kkt import kkt_residuals
from .models import FeatureError, LinearModel, TrainConfig

log = logging.getLogger(__name__)


class LinearFit(NamedTuple):
    model: LinearModel
    alpha: np.ndarray
    iterations: int
    kkt_residual: float


def stack_training_set(pos: np.ndarray, neg: np.ndarray):
    pos = np.atleast_2d(np.asarray(pos))
    neg = np.atleast_2d(np.asarray(neg))
    if pos.size == 0 or neg.size == 0 or len(pos) == 0 or len(neg) == 0:
        raise FeatureError("both classes need at least one sample")
    if pos.shape[1] != neg.shape[1]:
        raise FeatureError(f"feature lengths differ: {pos.shape[1]} vs {neg.shape[1]}")
    x = np.concatenate([pos, neg]).astype(np.float64)
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    return x, y


def fit_linear(pos: np.ndarray, neg: np.ndarray, cfg: TrainConfig) -> LinearFit:
    """Solve the dual by greedy coordinate descent on the Gram matrix.

    Each step updates the coordinate with the largest projected gradient,
    which for this dual is exactly that sample's KKT violation. Stops when
    the violation recomputed from the final weights is at most
    ``cfg.kkt_tol`` or after ``cfg.max_solver_iters`` updates.
    """
    x, y = stack_training_set(pos, neg)
    n, d = x.shape
    c = float(cfg.c)
    scale = float(np.sqrt(np.mean(np.einsum("ij,ij->i", x, x)))) or 1.0
    x = x / scale
    q = (x @ x.T + 1.0) * np.outer(y, y)
    diag = np.diag(q).copy()

    alpha = np.zeros(n)
    steps = 0
    residual = np.inf
    while True:
        grad = q @ alpha - 1.0
        while steps < cfg.max_solver_iters:
            pg = np.where(alpha <= 0.0, np.minimum(grad, 0.0),
                          np.where(alpha >= c, np.maximum(grad, 0.0), grad))
            i = int(np.argmax(np.abs(pg)))
            if abs(pg[i]) <= 0.5 * cfg.kkt_tol:
                break
            steps += 1
            a_new = min(max(alpha[i] - grad[i] / diag[i], 0.0), c)
            delta = a_new - alpha[i]
            alpha[i] = a_new
            grad += delta * q[i]
        ay = alpha * y
        w = ay @ x
        wb = float(ay.sum())
        margins = y * (x @ w + wb)
        residual = float(kkt_residuals(alpha, margins, c).max())
        if residual <= cfg.kkt_tol or steps >= cfg.max_solver_iters:
            break
    if residual > cfg.kkt_tol:
        log.warning("linear SVM stopped at iteration cap with KKT residual %.3g", residual)
    model = LinearModel(weights=w / scale, bias=wb, threshold=0.0)
    return LinearFit(model, alpha, steps, residual)


def train_linear(pos: np.ndarray, neg: np.ndarray, cfg: TrainConfig) -> LinearModel:
    return fit_linear(pos, neg, cfg).model
