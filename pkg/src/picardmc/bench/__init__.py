from .metrics import (
    MetricsReport,
    incorrect_guess_probability,
    moment_errors,
    moment_errors_from_stats,
    reference_constants,
    speedup_metric,
)
from .presets import ExperimentConfig, parse_config, run_experiment

__all__ = [
    "MetricsReport",
    "speedup_metric",
    "moment_errors",
    "moment_errors_from_stats",
    "incorrect_guess_probability",
    "reference_constants",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
]
