"""Hidden Markov models of arbitrary order with Gaussian volatility emissions."""

from ._core import (
    FitResult,
    HohmmError,
    ParameterSet,
    PosteriorSlice,
    Prediction,
    SmoothedJoint,
    Smoothing,
    backward_pass,
    bic,
    emission_density,
    fit,
    grid_search,
    ingest,
    local_decode,
    log_likelihood,
    oracle,
    param_count,
    predict,
    simulate,
    smooth,
    uniform_parameters,
    validate,
)

__all__ = [
    "FitResult",
    "HohmmError",
    "ParameterSet",
    "PosteriorSlice",
    "Prediction",
    "SmoothedJoint",
    "Smoothing",
    "backward_pass",
    "bic",
    "emission_density",
    "fit",
    "grid_search",
    "ingest",
    "local_decode",
    "log_likelihood",
    "oracle",
    "param_count",
    "predict",
    "simulate",
    "smooth",
    "uniform_parameters",
    "validate",
]
