"""Gaussian-process surface temperature emulator with a k-box energy balance
prior: exact posteriors over temperature and radiative forcing, spatial
pattern-scaling extension, marginal-likelihood fitting and a brute-force
oracle suite."""

from .ebm import (
    AgentForcing,
    BoxModelParams,
    ForcingParams,
    ImpulseParams,
    TimeGrid,
    build_feedback_matrix,
    convolution_operator,
    diagonalize,
    forcing_response,
    thermal_response,
)
from .inference import (
    EmulatorModel,
    FitSettings,
    GPPrior,
    PosteriorDistribution,
    build_prior,
    build_prior_from_model,
    fit_hyperparameters,
    marginal_log_likelihood,
    posterior_forcing,
    posterior_temperature,
    predictive_log_density,
    sample_posterior,
    with_variability,
)
from .kernels import (
    GramMatrix,
    KernelConfig,
    forcing_gram,
    forcing_temperature_cross_gram,
    internal_variability_gram,
    matern,
    temperature_gram,
    thermal_cross_gram,
)
from .metrics import ScoreReport, deterministic_scores, probabilistic_scores, spatial_scores
from .model_io import load_model, parse_model, save_model, serialize_model
from .scenario import (
    AgentSpec,
    Scenario,
    SpatialGrid,
    Standardization,
    TrainingSet,
    assemble_training_set,
    load_scenario,
    save_scenario,
    to_anomaly,
)
from .spatial import (
    PatternScalingMap,
    area_weighted_mean,
    fit_pattern_scaling,
    spatial_posterior,
    spatial_prior,
)

__version__ = "0.1.0"
