"""Structure learning for Gaussian data seen through unknown diagonal transformations."""
from .errors import GnpnError
from .exactcov import SeriesConfig, exact_sigma_pi, exact_tau, kappa_of, lambda_of, predict, quadrature_oracle
from .experiments import ExperimentConfig, ExperimentReport, run_experiment, sample_gaussian, score
from .graphgen import (
    ErConfig,
    GraphStructure,
    GwConfig,
    PrecisionModel,
    circle_precision,
    gen_erdos_renyi,
    gen_galton_watson,
    model_from_matrix,
)
from .learner import LearnOptions, LearnResult, empirical_correlation, kneedle, learn
from .matcore import rng_stream
from .transforms import BUILTIN_NAMES, TransformSpec, apply_transforms, builtin, resolve_transforms

__all__ = [
    "BUILTIN_NAMES", "ErConfig", "ExperimentConfig", "ExperimentReport", "GnpnError", "GraphStructure",
    "GwConfig", "LearnOptions", "LearnResult", "PrecisionModel", "SeriesConfig", "TransformSpec",
    "apply_transforms", "builtin", "circle_precision", "empirical_correlation", "exact_sigma_pi", "exact_tau",
    "gen_erdos_renyi", "gen_galton_watson", "kappa_of", "kneedle", "lambda_of", "learn", "model_from_matrix",
    "predict", "quadrature_oracle", "resolve_transforms", "rng_stream", "run_experiment", "sample_gaussian",
    "score",
]
