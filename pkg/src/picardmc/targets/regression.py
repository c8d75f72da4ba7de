"""Bayesian regression posteriors: linear, logistic and Poisson likelihoods
with standard Gaussian priors on the coefficients.

Data generation follows the benchmark convention: covariate rows are
N(0, I_d / d), the true coefficient vector is N(0, I_d), and the sample size
is 5d for the linear model and 10d for logistic/Poisson.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from ..rng import StreamKey, generator_at
from .base import TargetModel


class RegressionModel(Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    POISSON = "poisson"


SAMPLES_PER_DIM = {
    RegressionModel.LINEAR: 5,
    RegressionModel.LOGISTIC: 10,
    RegressionModel.POISSON: 10,
}


@dataclass
class RegressionData:
    model: RegressionModel
    A: np.ndarray  # (n, d) covariates
    y: np.ndarray  # (n,) responses
    x_true: np.ndarray  # (d,)
    sigma2: float = 1.0  # observation noise variance (linear model only)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]


def generate_regression_data(
    model: RegressionModel, d: int, key: StreamKey, sigma2: float = 1.0
) -> RegressionData:
    """Draw a synthetic dataset, deterministic in the key."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    gen = generator_at(key, 0)
    n = SAMPLES_PER_DIM[model] * d
    A = gen.standard_normal((n, d)) / np.sqrt(d)
    x_true = gen.standard_normal(d)
    t = A @ x_true
    if model is RegressionModel.LINEAR:
        y = t + np.sqrt(sigma2) * gen.standard_normal(n)
    elif model is RegressionModel.LOGISTIC:
        y = (gen.random(n) < expit(t)).astype(float)
    else:
        y = gen.poisson(np.exp(t)).astype(float)
    return RegressionData(model=model, A=A, y=y, x_true=x_true, sigma2=sigma2)


def regression_log_posterior(data: RegressionData, x: np.ndarray) -> float:
    """Log posterior (likelihood + standard Gaussian prior), constants dropped.

    The logistic term uses logaddexp for stability; the Poisson term is left
    to overflow to -inf rather than clamping the exponent, so far-out states
    are simply rejected.
    """
    x = np.asarray(x, dtype=float)
    t = data.A @ x
    if data.model is RegressionModel.LINEAR:
        resid = data.y - t
        loglik = -0.5 * float(np.dot(resid, resid)) / data.sigma2
    elif data.model is RegressionModel.LOGISTIC:
        # sum_i [y_i t_i - log(1 + e^{t_i})]
        loglik = float(np.dot(data.y, t) - np.sum(np.logaddexp(0.0, t)))
    else:
        with np.errstate(over="ignore"):
            rate_sum = float(np.sum(np.exp(t)))
        loglik = float(np.dot(data.y, t)) - rate_sum
    prior = -0.5 * float(np.dot(x, x))
    value = loglik + prior
    return value if np.isfinite(value) else float("-inf")


def _regression_gradient(data: RegressionData, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = data.A @ x
    if data.model is RegressionModel.LINEAR:
        resid_term = (data.y - t) / data.sigma2
    elif data.model is RegressionModel.LOGISTIC:
        resid_term = data.y - expit(t)
    else:
        resid_term = data.y - np.exp(t)
    return data.A.T @ resid_term - x


def make_regression_target(data: RegressionData) -> TargetModel:
    moments = None
    if data.model is RegressionModel.LINEAR:
        moments = linear_posterior_moments(data)

    def log_density(x: np.ndarray) -> float:
        return regression_log_posterior(data, x)

    def gradient(x: np.ndarray) -> np.ndarray:
        return _regression_gradient(data, x)

    return TargetModel(
        d=data.d,
        log_density=log_density,
        gradient=gradient,
        analytic_moments=moments,
        name=f"{data.model.value}-d{data.d}",
    )


def linear_posterior_moments(data: RegressionData) -> Tuple[np.ndarray, np.ndarray]:
    """Exact posterior mean and per-coordinate sd of the linear model.

    Precision Lambda = A'A / sigma2 + I, mean = Lambda^{-1} A'y / sigma2.
    """
    if data.model is not RegressionModel.LINEAR:
        raise ValueError("analytic moments only exist for the linear model")
    if not (np.all(np.isfinite(data.A)) and np.all(np.isfinite(data.y))):
        raise ValueError("non-finite regression data")
    d = data.d
    precision = data.A.T @ data.A / data.sigma2 + np.eye(d)
    factor = cho_factor(precision, lower=True)
    mean = cho_solve(factor, data.A.T @ data.y / data.sigma2)
    cov = cho_solve(factor, np.eye(d))
    return mean, np.sqrt(np.diag(cov))


def save_regression_data(data: RegressionData, directory: Union[str, Path]) -> None:
    """Write A.csv and y.csv into the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "A.csv", data.A, delimiter=",")
    np.savetxt(directory / "y.csv", data.y, delimiter=",")


def load_regression_data(
    directory: Union[str, Path], model: RegressionModel, sigma2: float = 1.0
) -> RegressionData:
    """Load a dataset written by save_regression_data (or an external one).

    x_true is not part of the file format; it is filled with NaN.
    """
    directory = Path(directory)
    A = np.loadtxt(directory / "A.csv", delimiter=",", ndmin=2)
    y = np.loadtxt(directory / "y.csv", delimiter=",")
    y = np.atleast_1d(y)
    return RegressionData(
        model=model, A=A, y=y, x_true=np.full(A.shape[1], np.nan), sigma2=sigma2
    )
