"""Linear and HIK SVMs, the two-stage cascade and model files."""

from .hik import fit_hik, hik, hik_fast_table, hik_matrix, train_hik
from .kkt import kkt_residuals, max_kkt_residual
from .linear import fit_linear, train_linear
from .models import (
    CascadeModel, CascadeResult, FeatureError, HikModel, HikTable, LinearModel,
    TrainConfig, cascade_batch, cascade_score,
)
