"""Chain state, trajectory storage and the sequential reference simulator.

The sequential simulator is the oracle: whatever the parallel engine commits
must match it bit for bit. Both advance states strictly left to right with
`apply_step`, which fixes the floating-point summation order, and both cache
the current state's log-density so each step costs one target evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .kernels import BASIS_STREAM, KernelSpec, apply_step, kernel_step, proposal_jump
from .rng import Innovation, StreamKey, innovation_at
from .targets.base import TargetModel

InnovationSource = Callable[[int], Innovation]


@dataclass
class Trajectory:
    """States X_0..X_N plus the acceptance flag of each transition."""

    states: np.ndarray  # (N+1, d)
    accept_flags: np.ndarray  # (N,) bool

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def n_steps(self) -> int:
        return self.accept_flags.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accept_flags)) if self.n_steps else 0.0

    def to_csv(self, path: Union[str, Path], every: int = 1) -> None:
        """Header step,accepted,x_0,...,x_{d-1}; keep every m-th state.

        Row 0 is the initial state with accepted left empty.
        """
        if every < 1:
            raise ValueError(f"every must be >= 1, got {every}")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "accepted"] + [f"x_{i}" for i in range(self.d)])
            for i in range(0, self.states.shape[0], every):
                accepted = "" if i == 0 else int(self.accept_flags[i - 1])
                writer.writerow([i, accepted] + [repr(float(v)) for v in self.states[i]])


class RunningMoments:
    """Streaming per-coordinate mean/sd so N = 1e6 runs fit in memory."""

    def __init__(self, d: int):
        self.count = 0
        self._sum = np.zeros(d)
        self._sumsq = np.zeros(d)

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        self._sum += x
        self._sumsq += x * x

    def add_batch(self, rows: np.ndarray) -> None:
        self.count += rows.shape[0]
        self._sum += rows.sum(axis=0)
        self._sumsq += (rows * rows).sum(axis=0)

    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        return self._sum / self.count

    def sd(self) -> np.ndarray:
        if self.count < 2:
            raise ValueError("need at least 2 samples for a standard deviation")
        m = self.mean()
        var = (self._sumsq - self.count * m * m) / (self.count - 1)
        return np.sqrt(np.maximum(var, 0.0))


def _innovation_source(
    spec: KernelSpec, key: StreamKey, innovations: Optional[Union[Sequence[Innovation], InnovationSource]]
) -> InnovationSource:
    if innovations is None:
        return lambda i: innovation_at(key, spec.innovation_law, spec.d, spec.scale, i)
    if callable(innovations):
        return innovations
    seq = list(innovations)
    return lambda i: seq[i]


def sequential_simulate(
    spec: KernelSpec,
    target: TargetModel,
    x0: np.ndarray,
    n_steps: int,
    key: StreamKey,
    innovations: Optional[Union[Sequence[Innovation], InnovationSource]] = None,
) -> Trajectory:
    """Run the chain one step at a time and store everything.

    Fails fast if the initial state has zero density. `innovations` lets
    tests inject hand-built draws; by default innovation i comes from the
    counter-based stream at index i.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    x = np.array(x0, dtype=float)
    if x.shape != (spec.d,):
        raise ValueError(f"x0 has shape {x.shape}, kernel expects ({spec.d},)")
    lp = target.log_density(x)
    if lp == float("-inf"):
        raise ValueError("initial state has zero target density")
    source = _innovation_source(spec, key, innovations)
    basis_key = key.with_stream(BASIS_STREAM)

    states = np.empty((n_steps + 1, spec.d))
    flags = np.empty(n_steps, dtype=bool)
    states[0] = x
    for i in range(n_steps):
        res = kernel_step(spec, target, x, lp, source(i), basis_key=basis_key)
        if res.accepted:
            lp = res.log_density_proposal
        x = apply_step(x, res)
        states[i + 1] = x
        flags[i] = res.accepted
    return Trajectory(states=states, accept_flags=flags)


def sequential_moments(
    spec: KernelSpec,
    target: TargetModel,
    x0: np.ndarray,
    n_steps: int,
    key: StreamKey,
    burn_in: int = 0,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Streaming run keeping only running moments: (mean, sd, acceptance).

    Moments are over the states X_{burn_in+1}..X_N.
    """
    x = np.array(x0, dtype=float)
    lp = target.log_density(x)
    if lp == float("-inf"):
        raise ValueError("initial state has zero target density")
    basis_key = key.with_stream(BASIS_STREAM)
    moments = RunningMoments(spec.d)
    accepted = 0
    for i in range(n_steps):
        w = innovation_at(key, spec.innovation_law, spec.d, spec.scale, i)
        res = kernel_step(spec, target, x, lp, w, basis_key=basis_key)
        if res.accepted:
            lp = res.log_density_proposal
            accepted += 1
        x = apply_step(x, res)
        if i + 1 > burn_in:
            moments.add(x)
    return moments.mean(), moments.sd(), accepted / max(n_steps, 1)


def replay_flags(
    spec: KernelSpec, x0: np.ndarray, flags: Sequence[bool], key: StreamKey
) -> np.ndarray:
    """Rebuild the trajectory from stored acceptance flags alone.

    Prefix summation with the shared jump construction reproduces the
    original states bit-exactly; no target evaluations happen here.
    """
    basis_key = key.with_stream(BASIS_STREAM)
    states = np.empty((len(flags) + 1, spec.d))
    x = np.array(x0, dtype=float)
    states[0] = x
    for i, accepted in enumerate(flags):
        if accepted:
            w = innovation_at(key, spec.innovation_law, spec.d, spec.scale, i)
            x = x + proposal_jump(spec, w, basis_key)
        states[i + 1] = x
    return states
