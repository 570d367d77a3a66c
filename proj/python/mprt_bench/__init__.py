"""Python access to the MPRT bench core."""

from ._core import (
    Dataset,
    Model,
    MprtError,
    build_model,
    canonical_config,
    commands,
    config_hash,
    default_config,
    emprt_score,
    explain,
    generate_synthetic,
    histogram_entropy,
    load_model,
    methods,
    model_output_entropy,
    normalise,
    pearson,
    run_emprt,
    run_experiment,
    run_mprt,
    run_smprt,
    spearman,
    ssim,
    stage_accuracy,
    train,
    wilcoxon_p,
)

__all__ = [
    "Dataset",
    "Model",
    "MprtError",
    "build_model",
    "canonical_config",
    "commands",
    "config_hash",
    "default_config",
    "emprt_score",
    "explain",
    "generate_synthetic",
    "histogram_entropy",
    "load_model",
    "methods",
    "model_output_entropy",
    "normalise",
    "pearson",
    "run_emprt",
    "run_experiment",
    "run_mprt",
    "run_smprt",
    "spearman",
    "ssim",
    "stage_accuracy",
    "train",
    "wilcoxon_p",
]
