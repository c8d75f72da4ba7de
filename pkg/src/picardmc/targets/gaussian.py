"""Isotropic Gaussian target."""

from __future__ import annotations

from typing import Union

import numpy as np

from .base import TargetModel


def gaussian_log_density(mu: Union[np.ndarray, float], sigma2: float, x: np.ndarray) -> float:
    """log of N(mu, sigma2 * I) density at x, up to the normalizing constant."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    diff = np.asarray(x, dtype=float) - mu
    return float(-0.5 * np.dot(diff, diff) / sigma2)


def isotropic_gaussian(d: int, mu: Union[np.ndarray, float] = 0.0, sigma2: float = 1.0) -> TargetModel:
    mu_vec = np.broadcast_to(np.asarray(mu, dtype=float), (d,)).copy()
    sd = np.full(d, np.sqrt(sigma2))

    def log_density(x: np.ndarray) -> float:
        return gaussian_log_density(mu_vec, sigma2, x)

    def gradient(x: np.ndarray) -> np.ndarray:
        return -(np.asarray(x, dtype=float) - mu_vec) / sigma2

    return TargetModel(
        d=d,
        log_density=log_density,
        gradient=gradient,
        analytic_moments=(mu_vec, sd),
        name=f"gaussian-d{d}",
    )
