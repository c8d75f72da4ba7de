"""Transition functions f(x, W) for the supported Markov kernels.

Random Walk Metropolis and Metropolis-within-Gibbs are the zeroth-order
kernels the parallel engine supports; the unadjusted Langevin step is kept as
a first-order comparison kernel only.

Every increment function is pure, and exactly the same code path is used by
the sequential simulator and by the parallel engine. That is a hard
requirement: bit-identical outputs rely on the two paths performing the same
floating-point operations in the same order.

Acceptance is tested in log space as  log pi(x+z) - log pi(x) >= log u,
with u = 0 mapping to log u = -inf (always accepts) and a proposal with
log-density -inf always rejecting, whatever u is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .rng import (
    BASIS_STREAM,
    TUNING_STREAM,
    Innovation,
    InnovationLaw,
    StreamKey,
    haar_basis,
    innovation_at,
)
from .targets.base import TargetModel

TARGET_ACCEPTANCE = {"rwm": 0.234, "mwg": 0.40}


class KernelKind(Enum):
    RWM = "rwm"
    MWG = "mwg"
    ULA = "ula"


class BasisMode(Enum):
    STANDARD = "standard"
    HAAR_PER_SWEEP = "haar-per-sweep"


class TuningError(RuntimeError):
    """Raised when step-size tuning cannot reach the target acceptance."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel configuration.

    scale is the realized proposal standard deviation: per coordinate for
    RWM/ULA, of the scalar jump for MwG. basis_mode only matters for MwG and
    also selects the innovation law: the standard basis pairs with Gaussian
    scalar jumps (the experiments' convention), the per-sweep Haar basis with
    the sign * chi(d) law.
    """

    kind: KernelKind
    d: int
    scale: float
    basis_mode: BasisMode = BasisMode.STANDARD

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def innovation_law(self) -> InnovationLaw:
        if self.kind is KernelKind.RWM:
            return InnovationLaw.RWM
        if self.kind is KernelKind.ULA:
            return InnovationLaw.ULA
        if self.basis_mode is BasisMode.HAAR_PER_SWEEP:
            return InnovationLaw.MWG_CHI
        return InnovationLaw.MWG_GAUSS


@dataclass
class StepResult:
    """One evaluated transition: the increment and whether it was accepted.

    increment is the zero vector exactly when accepted is False (Metropolis
    kernels). log_density_proposal carries log pi at the proposed point so
    callers can maintain the current state's log-density without a second
    target evaluation; it is NaN for ULA, which never evaluates log pi.
    """

    increment: np.ndarray
    accepted: bool
    log_density_proposal: float


def _log_u(u: float) -> float:
    return math.log(u) if u > 0.0 else float("-inf")


def accepts(lp_prop: float, lp_x: float, u: float) -> bool:
    """The Metropolis indicator B(x, u, z) in log space.

    A -inf proposal always rejects, even for u = 0; otherwise u = 0 always
    accepts (matching the >= in the ratio form of the indicator).
    """
    return lp_prop > float("-inf") and (lp_prop - lp_x) >= _log_u(u)


def _metropolis(target, x, lp_x, hat_z: np.ndarray, u: float) -> StepResult:
    proposal = x + hat_z
    lp_prop = target.log_density(proposal)
    accepted = accepts(lp_prop, lp_x, u)
    if accepted:
        return StepResult(increment=hat_z, accepted=True, log_density_proposal=lp_prop)
    return StepResult(
        increment=np.zeros_like(hat_z), accepted=False, log_density_proposal=lp_prop
    )


def rwm_increment(
    target: TargetModel, x: np.ndarray, w: Innovation, lp_x: Optional[float] = None
) -> StepResult:
    """Random Walk Metropolis increment: z if pi(x+z)/pi(x) >= u, else 0."""
    if lp_x is None:
        lp_x = target.log_density(x)
    return _metropolis(target, x, lp_x, np.asarray(w.z, dtype=float), w.u)


def mwg_increment(
    target: TargetModel,
    x: np.ndarray,
    step_index: int,
    w: Innovation,
    basis: Optional[np.ndarray] = None,
    lp_x: Optional[float] = None,
) -> StepResult:
    """Metropolis-within-Gibbs increment along direction (step_index mod d).

    basis is a (d, d) orthonormal matrix whose columns are the update
    directions; None means the standard basis.
    """
    d = x.shape[0]
    coord = step_index % d
    if basis is None:
        hat_z = np.zeros(d)
        hat_z[coord] = w.z
    else:
        hat_z = basis[:, coord] * w.z
    if lp_x is None:
        lp_x = target.log_density(x)
    return _metropolis(target, x, lp_x, hat_z, w.u)


def ula_increment(target: TargetModel, x: np.ndarray, w: Innovation, scale: float) -> StepResult:
    """Unadjusted Langevin step: -(scale^2 / 2) grad V(x) + z, always accepted.

    w.z already carries the scale factor, matching the other kernels.
    """
    if target.gradient is None:
        raise ValueError(f"target {target.name!r} has no gradient; ULA needs one")
    drift = (scale * scale / 2.0) * target.gradient(x)
    return StepResult(
        increment=drift + np.asarray(w.z, dtype=float),
        accepted=True,
        log_density_proposal=float("nan"),
    )


def proposal_jump(
    spec: KernelSpec, w: Innovation, basis_key: Optional[StreamKey] = None
) -> np.ndarray:
    """The proposed displacement hat_z as a dense d-vector.

    For MwG the direction is derived from the innovation's global step index;
    Haar mode resamples the basis once per sweep of d steps. Single
    construction point so every consumer produces identical bits.
    """
    if spec.kind is not KernelKind.MWG:
        return np.asarray(w.z, dtype=float)
    coord = w.step_index % spec.d
    if spec.basis_mode is BasisMode.HAAR_PER_SWEEP:
        if basis_key is None:
            raise ValueError("Haar basis mode needs a basis_key")
        basis = haar_basis(basis_key, w.step_index // spec.d, spec.d)
        return basis[:, coord] * w.z
    hat_z = np.zeros(spec.d)
    hat_z[coord] = w.z
    return hat_z


def kernel_step(
    spec: KernelSpec,
    target,
    x: np.ndarray,
    lp_x: float,
    w: Innovation,
    basis_key: Optional[StreamKey] = None,
) -> StepResult:
    """Uniform dispatcher used by the sequential oracle and the engine."""
    if spec.kind is KernelKind.ULA:
        return ula_increment(target, x, w, spec.scale)
    return _metropolis(target, x, lp_x, proposal_jump(spec, w, basis_key), w.u)


def apply_step(x: np.ndarray, result: StepResult) -> np.ndarray:
    """Advance the state. Rejections return x itself, not x + 0, so rejected
    steps are bitwise no-ops."""
    if result.accepted:
        return x + result.increment
    return x


def measure_acceptance(
    spec: KernelSpec,
    target: TargetModel,
    x0: np.ndarray,
    key: StreamKey,
    n_steps: int,
    index_offset: int = 0,
) -> float:
    """Empirical acceptance rate of a short run, used by tuning and tests."""
    basis_key = key.with_stream(BASIS_STREAM)
    x = np.asarray(x0, dtype=float)
    lp = target.log_density(x)
    accepted = 0
    for t in range(n_steps):
        w = innovation_at(key, spec.innovation_law, spec.d, spec.scale, index_offset + t)
        res = kernel_step(spec, target, x, lp, w, basis_key=basis_key)
        if res.accepted:
            accepted += 1
            lp = res.log_density_proposal
        x = apply_step(x, res)
    return accepted / n_steps


def tune_step_size(
    spec: KernelSpec,
    target: TargetModel,
    x0: np.ndarray,
    key: StreamKey,
    warmup: int,
    failure_tolerance: float = 0.15,
) -> KernelSpec:
    """Robbins-Monro tuning of log(scale) to the standard acceptance target
    (23.4% for RWM, 40% for MwG), gain 1/(t+10).

    The returned spec has the scale frozen after warmup; a fresh probe run of
    the same length must land within failure_tolerance of the target or a
    TuningError is raised.
    """
    if warmup < 100:
        raise ValueError(f"warmup must be >= 100, got {warmup}")
    if spec.kind is KernelKind.ULA:
        raise ValueError("ULA has no acceptance rate to tune")
    target_rate = TARGET_ACCEPTANCE[spec.kind.value]
    tune_key = key.with_stream(TUNING_STREAM)
    basis_key = key.with_stream(BASIS_STREAM)

    log_scale = math.log(spec.scale)
    x = np.asarray(x0, dtype=float)
    lp = target.log_density(x)
    if lp == float("-inf"):
        raise ValueError("x0 has zero target density")
    for t in range(warmup):
        scale = math.exp(log_scale)
        w = innovation_at(tune_key, spec.innovation_law, spec.d, scale, t)
        res = kernel_step(replace(spec, scale=scale), target, x, lp, w, basis_key=basis_key)
        if res.accepted:
            lp = res.log_density_proposal
        x = apply_step(x, res)
        log_scale += (float(res.accepted) - target_rate) / (t + 10.0)

    tuned = replace(spec, scale=math.exp(log_scale))
    realized = measure_acceptance(tuned, target, x, tune_key, warmup, index_offset=warmup)
    if abs(realized - target_rate) > failure_tolerance:
        raise TuningError(
            f"tuning failed: acceptance {realized:.3f} not within "
            f"{failure_tolerance} of target {target_rate}"
        )
    return tuned
