from .base import TargetModel
from .gaussian import gaussian_log_density, isotropic_gaussian
from .regression import (
    RegressionData,
    RegressionModel,
    generate_regression_data,
    linear_posterior_moments,
    load_regression_data,
    make_regression_target,
    regression_log_posterior,
    save_regression_data,
)
from .sir import (
    SirData,
    load_sir_events,
    make_sir_target,
    sample_sir_initial_state,
    save_sir_events,
    sir_conditional_sample,
    sir_forward_simulate,
    sir_log_posterior,
    sir_pressure,
    sir_pressure_naive,
)

__all__ = [
    "TargetModel",
    "gaussian_log_density",
    "isotropic_gaussian",
    "RegressionData",
    "RegressionModel",
    "generate_regression_data",
    "regression_log_posterior",
    "make_regression_target",
    "linear_posterior_moments",
    "save_regression_data",
    "load_regression_data",
    "SirData",
    "sir_forward_simulate",
    "sir_pressure",
    "sir_pressure_naive",
    "sir_log_posterior",
    "sir_conditional_sample",
    "make_sir_target",
    "sample_sir_initial_state",
    "save_sir_events",
    "load_sir_events",
]
