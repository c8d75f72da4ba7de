"""Benchmark metrics: empirical speedup, standardized moment errors, and the
incorrect-guess probability curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..chain import sequential_simulate
from ..engine import RunRecord, picard_map
from ..kernels import KernelKind, KernelSpec
from ..rng import StreamKey, derive_seed, innovation_at
from ..targets.base import TargetModel


@dataclass
class MetricsReport:
    """Bundle of the measured quantities for one experiment row."""

    G_hat: float
    M: float = float("nan")
    E: float = float("nan")
    acceptance_rate: float = float("nan")
    guess_prob_curve: Optional[List[Tuple[int, float, float]]] = None
    c0_ref: float = float("nan")
    delta_ref: float = float("nan")


def speedup_metric(record: RunRecord) -> float:
    """Committed sequential steps per parallel round, G_hat = L / J."""
    if record.J < 1:
        raise ValueError("run has no rounds")
    return record.L / record.J


def moment_errors_from_stats(
    mean_hat: np.ndarray,
    sd_hat: np.ndarray,
    reference: Tuple[np.ndarray, np.ndarray],
) -> Tuple[float, float]:
    """Standardized mean error M and sd error E against reference moments.

    M = sqrt(mean_i ((mu_hat_i - mu_i)^2 / sigma_i^2)),
    E = sqrt(mean_i ((sd_hat_i - sigma_i) / sigma_i)^2).
    """
    mu, sigma = reference
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma == 0.0):
        raise ValueError("reference standard deviation has a zero coordinate")
    m = math.sqrt(float(np.mean((mean_hat - mu) ** 2 / sigma**2)))
    e = math.sqrt(float(np.mean(((sd_hat - sigma) / sigma) ** 2)))
    return m, e


def moment_errors(
    states: np.ndarray, burn_in: int, reference: Tuple[np.ndarray, np.ndarray]
) -> Tuple[float, float]:
    """Moment errors of a stored trajectory, discarding states 0..burn_in."""
    if states.shape[0] <= burn_in + 1:
        raise ValueError("trajectory not longer than burn-in")
    kept = states[burn_in + 1 :]
    return moment_errors_from_stats(
        kept.mean(axis=0), kept.std(axis=0, ddof=1), reference
    )


def reference_constants(kind: KernelKind, h: float, gamma: float, d: int) -> Tuple[float, float]:
    """Annotation constants (c0, delta(d)) of the incorrect-guess bound.

    RWM: c0 = 15 h^4 (sqrt(2/pi) + h*gamma/2)^2, delta = (5/3) exp(-3d/2).
    MwG: c0 = 2 h^4 (sqrt(2/pi) + h*gamma/2)^2, delta = 11 exp(-d/10).
    """
    base = (math.sqrt(2.0 / math.pi) + h * gamma / 2.0) ** 2
    if kind is KernelKind.MWG:
        return 2.0 * h**4 * base, 11.0 * math.exp(-d / 10.0)
    return 15.0 * h**4 * base, (5.0 / 3.0) * math.exp(-1.5 * d)


def incorrect_guess_probability(
    spec: KernelSpec,
    target: TargetModel,
    i_values: Sequence[int],
    j: int,
    reps: int,
    key: StreamKey,
    x0_sampler: Callable[[np.random.Generator], np.ndarray],
) -> List[Tuple[int, float, float]]:
    """Empirical P(f(X^(j)_i, W_i) != f(X_i, W_i)) for each i, with binomial SEs.

    Each replication applies the Picard map j+1 times from the constant
    initialization; the last application's flags are the increments the j-th
    iterate generates, compared against the sequential oracle's flags.
    """
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    i_values = list(i_values)
    k = max(i_values) + 1
    wrong = np.zeros(len(i_values))
    idx = np.array(i_values)
    for rep in range(reps):
        rep_key = StreamKey(derive_seed(key.seed, rep))
        gen = np.random.Generator(np.random.PCG64(derive_seed(key.seed, rep, 1)))
        x0 = x0_sampler(gen)
        oracle = sequential_simulate(spec, target, x0, k, rep_key)
        x_bar = np.tile(x0, (k + 1, 1))
        flags = np.zeros(k, dtype=bool)
        lp0 = target.log_density(x0)
        w_bar = [
            innovation_at(rep_key, spec.innovation_law, spec.d, spec.scale, i)
            for i in range(k)
        ]
        for _ in range(j + 1):
            x_bar, flags, _, _ = picard_map(
                x_bar, w_bar, spec, target, rep_key, flags_prev=flags, lp_head=lp0
            )
        wrong += flags[idx] != oracle.accept_flags[idx]
    p_hat = wrong / reps
    se = np.sqrt(p_hat * (1.0 - p_hat) / reps)
    return [(int(i), float(p), float(s)) for i, p, s in zip(i_values, p_hat, se)]
