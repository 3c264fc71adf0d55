"""Soft-margin KKT residuals shared by both solvers."""

import numpy as np


def kkt_residuals(alpha: np.ndarray, margins: np.ndarray, c: float, atol: float = 1e-12) -> np.ndarray:
    """Per-sample violation of the soft-margin KKT conditions.

    ``margins`` holds ``y_i f(x_i)``. The conditions are::

        alpha_i = 0      ->  y f >= 1
        0 < alpha_i < C  ->  y f == 1
        alpha_i = C      ->  y f <= 1
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    gap = np.asarray(margins, dtype=np.float64) - 1.0
    at_lower = alpha <= atol
    at_upper = alpha >= c - atol * max(1.0, c)
    viol = np.abs(gap)
    viol = np.where(at_lower, np.maximum(-gap, 0.0), viol)
    viol = np.where(at_upper & ~at_lower, np.maximum(gap, 0.0), viol)
    return viol


def max_kkt_residual(alpha, margins, c) -> float:
    r = kkt_residuals(alpha, margins, c)
    return float(r.max()) if r.size else 0.0
