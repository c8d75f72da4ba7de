"""Log-density oracles the samplers draw from."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

LogDensity = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


@dataclass
class TargetModel:
    """A target distribution known through point evaluations of log pi.

    log_density returns an extended real: -inf outside the support. The
    gradient is optional (absent for the SIR posterior) and only required by
    the unadjusted Langevin kernel. analytic_moments, when available, holds
    the per-coordinate (mean, standard deviation) of the target.
    """

    d: int
    log_density: LogDensity
    gradient: Optional[Gradient] = None
    analytic_moments: Optional[Tuple[np.ndarray, np.ndarray]] = None
    name: str = "target"


class EvalCounter:
    """Wraps a TargetModel and counts log-density evaluations.

    The parallel engine's cost model is 'log pi evaluations per round', so
    the count has to be exact; every evaluation path goes through here. The
    counter is locked because rounds evaluate from a thread pool.
    """

    def __init__(self, target: TargetModel):
        self._target = target
        self._lock = threading.Lock()
        self.count = 0
        self.d = target.d
        self.gradient = target.gradient
        self.analytic_moments = target.analytic_moments
        self.name = target.name

    def log_density(self, x: np.ndarray) -> float:
        with self._lock:
            self.count += 1
        return self._target.log_density(x)
