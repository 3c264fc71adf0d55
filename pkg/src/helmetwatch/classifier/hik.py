"""Histogram intersection kernel SVM.

Training is SMO with second-order working-set selection (the LIBSVM scheme)
on a precomputed kernel matrix. Prediction can use a per-dimension lookup
table, which is exact for integer-valued features: for every dimension ``d``
and value ``v``, ``T[d][v] = sum_j a_j * min(v, sv_j[d])``.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .kkt import kkt_residuals
from .linear import stack_training_set
from .models import FeatureError, HikModel, HikTable, TrainConfig

log = logging.getLogger(__name__)

_TAU = 1e-12


def hik(x: np.ndarray, y: np.ndarray) -> float:
    """``K(x, y) = sum_i min(x_i, y_i)``."""
    return float(np.minimum(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)).sum())


def hik_matrix(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Kernel matrix between the rows of ``a`` and ``b`` (``b = a`` if omitted)."""
    a = np.atleast_2d(np.asarray(a))
    sym = b is None
    b = a if sym else np.atleast_2d(np.asarray(b))
    # columns that are zero on either side contribute nothing
    keep = (a.max(axis=0) > 0) & (b.max(axis=0) > 0)
    if np.issubdtype(a.dtype, np.integer) and np.issubdtype(b.dtype, np.integer):
        dtype = np.int32 if max(a.max(initial=0), b.max(initial=0)) < 2**31 else np.int64
    else:
        dtype = np.float64
    a = np.ascontiguousarray(a[:, keep], dtype=dtype)
    b = np.ascontiguousarray(b[:, keep], dtype=dtype)
    out = np.empty((len(a), len(b)), dtype=np.float64)
    if sym:
        for i in range(len(a)):
            row = np.minimum(a[i], b[i:]).sum(axis=1)
            out[i, i:] = row
            out[i:, i] = row
    else:
        for i in range(len(a)):
            out[i] = np.minimum(a[i], b).sum(axis=1)
    return out


class HikFit(NamedTuple):
    model: HikModel
    alpha: np.ndarray
    iterations: int
    kkt_residual: float
    kernel_scale: float


def smo(kernel: np.ndarray, y: np.ndarray, c: float, tol: float, max_iter: int):
    """Solve ``min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0`` with ``Q = yy' * K``.

    Returns ``(alpha, rho, iterations)``; the decision function is
    ``sum_j alpha_j y_j K(x_j, x) - rho``.
    """
    n = len(y)
    q = kernel * np.outer(y, y)
    diag = np.diag(kernel).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    while True:
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            m_up, m_low = 0.0, 0.0
            break
        cand_up = np.where(up, yg, -np.inf)
        i = int(np.argmax(cand_up))
        m_up = cand_up[i]
        m_low = float(np.where(low, yg, np.inf).min())
        if m_up - m_low <= tol or it >= max_iter:
            break

        b = m_up - yg
        eligible = low & (b > 0)
        a = diag[i] + diag - 2.0 * y[i] * y * q[i]
        a = np.where(a > 0, a, _TAU)
        obj = np.where(eligible, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        it += 1

        qi, qj = q[i], q[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * qi[j]
            quad = quad if quad > 0 else _TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * qi[j]
            quad = quad if quad > 0 else _TAU
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += qi * (ai - ai_old) + qj * (aj - aj_old)

    rho = -(m_up + m_low) / 2.0
    return alpha, rho, it


def dual_objective(kernel: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Dual objective to maximise: ``sum a - 1/2 sum a_i a_j y_i y_j K_ij``."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ kernel @ ay)


def fit_hik(pos: np.ndarray, neg: np.ndarray, cfg: TrainConfig, kernel: np.ndarray | None = None) -> HikFit:
    pos = np.atleast_2d(np.asarray(pos))
    neg = np.atleast_2d(np.asarray(neg))
    for arr in (pos, neg):
        if arr.size and np.any(arr < 0):
            raise FeatureError("HIK features must be non-negative")
    x, y = stack_training_set(pos, neg)
    raw = np.concatenate([pos, neg])
    if kernel is None:
        kernel = hik_matrix(raw)
    c = float(cfg.kernel_c)
    # solve on a kernel with unit mean diagonal so c is magnitude-free
    scale = float(np.mean(np.diag(kernel))) or 1.0
    kernel = kernel / scale
    alpha, rho, it = smo(kernel, y, c, cfg.kkt_tol, cfg.max_solver_iters)
    margins = y * ((alpha * y) @ kernel - rho)
    residual = float(kkt_residuals(alpha, margins, c).max())
    if residual > cfg.kkt_tol:
        log.warning("HIK SVM stopped with KKT residual %.3g after %d iterations", residual, it)
    sv = alpha > 0
    model = HikModel(
        support_vectors=raw[sv].copy(),
        alphas=(alpha * y)[sv] / scale,
        bias=-rho,
        threshold=0.0,
    )
    if np.issubdtype(raw.dtype, np.integer):
        model.table = hik_fast_table(model)
    return HikFit(model, alpha, it, residual, scale)


def train_hik(pos: np.ndarray, neg: np.ndarray, cfg: TrainConfig) -> HikModel:
    return fit_hik(pos, neg, cfg).model


def hik_fast_table(model: HikModel) -> HikTable:
    """Exact lookup table for integer-valued support vectors."""
    sv = np.asarray(model.support_vectors)
    dim = sv.shape[1]
    if sv.size and not np.issubdtype(sv.dtype, np.integer):
        if not np.all(np.equal(np.mod(sv, 1), 0)):
            raise FeatureError("fast table needs integer-valued support vectors")
    sv = sv.astype(np.int64)
    if sv.size and sv.min() < 0:
        raise FeatureError("support vectors must be non-negative")
    a = np.asarray(model.alphas, dtype=np.float64)
    vmax = sv.max(axis=0) if len(sv) else np.zeros(dim, dtype=np.int64)
    sizes = vmax + 1
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    values = np.zeros(int(sizes.sum()))
    for d in np.flatnonzero(vmax > 0):
        col = sv[:, d]
        v = np.arange(vmax[d] + 1)
        mass = np.bincount(col, weights=a, minlength=vmax[d] + 1)
        below = np.cumsum(mass * v)               # sum of a_j * sv_j  over sv_j <= v
        above = a.sum() - np.cumsum(mass)          # sum of a_j over sv_j > v
        values[offsets[d]:offsets[d] + vmax[d] + 1] = below + v * above
    return HikTable(offsets=offsets, vmax=vmax.astype(np.int64), values=values)
