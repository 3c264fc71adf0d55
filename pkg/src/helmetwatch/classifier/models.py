"""Model containers and cascade evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..centrist import BLOCK_COLS, BLOCK_ROWS, FEATURE_DIM, WINDOW_H, WINDOW_W


class FeatureError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Solver and bootstrap settings.

    ``c`` is the soft-margin penalty of the linear stage, ``c_hik`` the one
    of the kernel stage (``None`` reuses ``c``). Both apply after the
    features (or kernel) are normalised to unit mean squared norm (or unit
    mean diagonal).
    """

    c: float = 1.0
    c_hik: Optional[float] = 10.0
    rounds: int = 3
    negatives_per_round: int = 200
    kkt_tol: float = 1e-3
    max_solver_iters: int = 200_000
    seed: int = 0

    def __post_init__(self):
        for name in ("c", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.c_hik is not None and not self.c_hik > 0:
            raise ValueError("c_hik must be positive")
        for name in ("rounds", "negatives_per_round", "max_solver_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def kernel_c(self) -> float:
        return self.c if self.c_hik is None else self.c_hik


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    threshold: float = 0.0

    def decision(self, features: np.ndarray) -> np.ndarray:
        f = np.asarray(features, dtype=np.float64)
        return f @ self.weights + self.bias


@dataclass
class HikTable:
    """Ragged lookup table: ``values[offsets[d] + min(v, vmax[d])]``."""

    offsets: np.ndarray
    vmax: np.ndarray
    values: np.ndarray

    def predict(self, features: np.ndarray, bias: float) -> np.ndarray:
        f = np.atleast_2d(np.asarray(features))
        idx = self.offsets[None, :] + np.minimum(f, self.vmax[None, :])
        return self.values[idx].sum(axis=1) + bias


@dataclass
class HikModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    bias: float
    threshold: float = 0.0
    table: Optional[HikTable] = field(default=None, repr=False)

    def __post_init__(self):
        self.support_vectors = np.asarray(self.support_vectors)
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        if self.support_vectors.ndim != 2:
            self.support_vectors = self.support_vectors.reshape(len(self.alphas), -1)
        if len(self.alphas) != len(self.support_vectors):
            raise ValueError("one alpha per support vector required")

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision_direct(self, features: np.ndarray) -> np.ndarray:
        f = np.atleast_2d(np.asarray(features, dtype=np.float64))
        sv = self.support_vectors.astype(np.float64)
        out = np.empty(len(f))
        for i, x in enumerate(f):
            out[i] = np.minimum(sv, x[None, :]).sum(axis=1) @ self.alphas
        return out + self.bias

    def decision(self, features: np.ndarray) -> np.ndarray:
        if self.table is not None:
            return self.table.predict(np.asarray(features, dtype=np.int64), self.bias)
        return self.decision_direct(features)


@dataclass
class CascadeModel:
    linear: LinearModel
    hik: HikModel
    window: tuple = (WINDOW_H, WINDOW_W)
    grid: tuple = (BLOCK_ROWS, BLOCK_COLS)

    def __post_init__(self):
        if self.linear.weights.shape[0] != self.hik.dim:
            raise ValueError(
                f"stage dimensions differ: {self.linear.weights.shape[0]} vs {self.hik.dim}"
            )

    @property
    def dim(self) -> int:
        return int(self.linear.weights.shape[0])


class CascadeResult(NamedTuple):
    accepted: bool
    score: float
    hik_evaluated: bool


def cascade_score(model: CascadeModel, feature: np.ndarray) -> CascadeResult:
    """Linear stage first; the HIK stage runs only when ``s1 >= theta1``."""
    f = np.asarray(feature)
    if f.shape != (model.dim,):
        raise FeatureError(f"feature length {f.shape} does not match model dim {model.dim}")
    s1 = float(f.astype(np.float64) @ model.linear.weights + model.linear.bias)
    if s1 < model.linear.threshold:
        return CascadeResult(False, s1, False)
    s2 = float(model.hik.decision(f[None, :])[0])
    return CascadeResult(s2 >= model.hik.threshold, s2, True)


def cascade_batch(model: CascadeModel, features: np.ndarray):
    """Vectorised ``cascade_score``: returns (accepted, scores, hik_evaluated)."""
    f = np.atleast_2d(np.asarray(features))
    s1 = f.astype(np.float64) @ model.linear.weights + model.linear.bias
    passed = s1 >= model.linear.threshold
    scores = s1.copy()
    if passed.any():
        scores[passed] = model.hik.decision(f[passed])
    accepted = passed & (scores >= model.hik.threshold)
    return accepted, scores, passed


__all__ = [
    "CascadeModel", "CascadeResult", "FeatureError", "HikModel", "HikTable",
    "LinearModel", "TrainConfig", "cascade_batch", "cascade_score", "FEATURE_DIM",
]
