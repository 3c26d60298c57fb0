"""Sparse random Fourier feature regression with embedded variable selection."""

from .baselines import BaselineKind, KernelRidgeModel, kernel_gram, train_baseline
from .data import (
    Dataset,
    SplitSpec,
    gen_se1,
    gen_se2,
    gen_se3,
    load_csv,
    save_csv,
    split,
)
from .features import (
    DegenerateDataError,
    Kernel,
    KernelFamily,
    RandomFeatureBasis,
    ScaleVector,
    feature_grad_column,
    feature_map,
    median_heuristic_sigma,
    sample_basis,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    emit_results,
    lambda_grid,
    rmse,
    run_experiment,
    support_dims,
)
from .model import (
    SrffConfig,
    SrffModel,
    load_model,
    predict,
    save_model,
    srff_gamma_gradient,
    srff_objective,
    train_srff,
)
from .optim import (
    FistaOptions,
    NonfiniteObjectiveError,
    SingularSystemError,
    fista_projected,
    project_simplex,
    solve_lasso,
    solve_ridge,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineKind",
    "Dataset",
    "DegenerateDataError",
    "ExperimentConfig",
    "ExperimentResult",
    "FistaOptions",
    "Kernel",
    "KernelFamily",
    "KernelRidgeModel",
    "NonfiniteObjectiveError",
    "RandomFeatureBasis",
    "ScaleVector",
    "SingularSystemError",
    "SplitSpec",
    "SrffConfig",
    "SrffModel",
    "emit_results",
    "feature_grad_column",
    "feature_map",
    "fista_projected",
    "gen_se1",
    "gen_se2",
    "gen_se3",
    "kernel_gram",
    "lambda_grid",
    "load_csv",
    "load_model",
    "median_heuristic_sigma",
    "predict",
    "project_simplex",
    "rmse",
    "run_experiment",
    "sample_basis",
    "save_csv",
    "save_model",
    "solve_lasso",
    "solve_ridge",
    "split",
    "srff_gamma_gradient",
    "srff_objective",
    "support_dims",
    "train_baseline",
    "train_srff",
]
