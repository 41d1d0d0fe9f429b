"""Two-layer kernel machines: learned linear first layer, cross-validation loss, greedy centers."""

__version__ = "0.1.0"

from .cv import CvLossValue, FoldPlan, NumericalError, cv_loss_grad, era_residuals, make_folds
from .data import (
    Dataset,
    Standardization,
    load_csv,
    metrics,
    sample_unit_cube,
    standardize,
    synth_function,
    train_test_split,
    write_csv,
)
from .greedy import (
    GreedyConfig,
    GreedyModel,
    GreedyTrace,
    fill_distance,
    fit_greedy,
    newton_values,
    power_values,
    predict,
    staged_predict,
)
from .kernels import KernelSpec, eval_phi, eval_phi_radial_derivative, gram_matrix, pairwise_distances
from .layer import (
    FirstLayer,
    SpectralReport,
    apply_layer,
    cumulative_power,
    principal_angles,
    spectral_report,
    two_layer_gram,
)
from .optim import AdamState, OptimConfig, OptimTrace, adam_step, optimize_first_layer

__all__ = [
    "adam_step",
    "AdamState",
    "apply_layer",
    "cumulative_power",
    "cv_loss_grad",
    "CvLossValue",
    "Dataset",
    "era_residuals",
    "eval_phi",
    "eval_phi_radial_derivative",
    "fill_distance",
    "FirstLayer",
    "fit_greedy",
    "FoldPlan",
    "gram_matrix",
    "GreedyConfig",
    "GreedyModel",
    "GreedyTrace",
    "KernelSpec",
    "load_csv",
    "make_folds",
    "metrics",
    "newton_values",
    "NumericalError",
    "OptimConfig",
    "optimize_first_layer",
    "OptimTrace",
    "pairwise_distances",
    "power_values",
    "predict",
    "principal_angles",
    "sample_unit_cube",
    "spectral_report",
    "SpectralReport",
    "staged_predict",
    "Standardization",
    "standardize",
    "synth_function",
    "train_test_split",
    "two_layer_gram",
    "write_csv",
]
