"""Self-guiding bi-Gaussian mirrors for FDR-controlled variable selection."""

__version__ = "0.1.0"

from .glm import (
    GlmFamily,
    LambdaRule,
    LassoFit,
    StandardizedDesign,
    lasso_linear,
    lasso_logistic,
    select_lambda,
    soft_threshold,
    standardize_columns,
)
from .mirrors import FeatureMirrorScores, compute_all_scores, draw_mirror_noise
from .selector import (
    BgmSelection,
    compute_cutoff,
    self_guiding_select,
    symmetric_baseline_select,
)
from .simulation import SimScenario, preset, run_replicates

__all__ = [
    "BgmSelection",
    "FeatureMirrorScores",
    "GlmFamily",
    "LambdaRule",
    "LassoFit",
    "SimScenario",
    "StandardizedDesign",
    "compute_all_scores",
    "compute_cutoff",
    "draw_mirror_noise",
    "lasso_linear",
    "lasso_logistic",
    "preset",
    "run_replicates",
    "select_lambda",
    "self_guiding_select",
    "soft_threshold",
    "standardize_columns",
    "symmetric_baseline_select",
]
