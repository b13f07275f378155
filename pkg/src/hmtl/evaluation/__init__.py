"""Metrics, bootstrap intervals, paired tests, model comparison and ablation."""

from hmtl.evaluation.compare import (
    METRICS,
    EvalReport,
    ModelEval,
    compare_models,
    evaluate_model,
    modality_subsets,
    run_ablation,
)
from hmtl.evaluation.metrics import auprc, auroc, regression_mse
from hmtl.evaluation.stats import (
    BootstrapResult,
    WilcoxonResult,
    bh_adjust,
    pivot_bootstrap_ci,
    pivot_interval,
    resample_indices,
    wilcoxon_signed_rank,
)

__all__ = [
    "METRICS",
    "BootstrapResult",
    "EvalReport",
    "ModelEval",
    "WilcoxonResult",
    "auprc",
    "auroc",
    "bh_adjust",
    "compare_models",
    "evaluate_model",
    "modality_subsets",
    "pivot_bootstrap_ci",
    "pivot_interval",
    "regression_mse",
    "resample_indices",
    "run_ablation",
    "wilcoxon_signed_rank",
]
