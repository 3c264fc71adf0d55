"""Evaluation metrics, ground-truth tables and the synthetic scene generator."""

from .metrics import (
    EvalReport, PrCurve, RocCurve, ScoredOutcome, accuracy, evaluate, match_detections,
    match_pairs, pr_curve, roc_auc,
)
from .synthetic import (
    PedestrianSpec, SyntheticConfig, TruthBox, default_test_scene, generate_synthetic,
    negative_images, positive_patches,
)
