"""Censored heavy-ball federated optimization simulator."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    FederatedDataset,
    HyperParams,
    LossModel,
    ParseError,
    PreconditionError,
    RateUndefinedError,
    ValidationError,
    check_simplified,
    condition_constants,
    condition_report,
    estimate_smoothness,
    f_star,
    global_gradient,
    global_objective,
    increasing_smoothness,
    load_libsvm,
    rate_constant,
    read_csv,
    recipe,
    run_config,
    run_experiment,
    simplified_eps1_bound,
    strong_convexity,
    synth_clusters,
    synth_controlled,
    synth_low_rank,
)

__all__ = [name for name in dir() if not name.startswith("_")]
