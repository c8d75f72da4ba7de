"""picardmc: parallel-in-time simulation of zeroth-order Metropolis chains.

The Online Picard engine reproduces the sequential chain bit-exactly using K
concurrent target evaluations per round; an approximate variant trades
exactness for throughput. See README.md for usage.
"""

from .chain import Trajectory, replay_flags, sequential_moments, sequential_simulate
from .engine import (
    PicardBlockState,
    RoundOutcome,
    RunRecord,
    agreement_prefix,
    approximate_prefix,
    classic_picard_run,
    init_block_state,
    online_picard_run,
    online_picard_step,
    picard_map,
)
from .kernels import (
    BasisMode,
    KernelKind,
    KernelSpec,
    StepResult,
    TuningError,
    mwg_increment,
    rwm_increment,
    tune_step_size,
    ula_increment,
)
from .rng import Innovation, InnovationLaw, StreamKey, haar_basis, innovation_at
from .targets import TargetModel

__version__ = "0.1.0"

__all__ = [
    "Trajectory",
    "sequential_simulate",
    "sequential_moments",
    "replay_flags",
    "PicardBlockState",
    "RoundOutcome",
    "RunRecord",
    "agreement_prefix",
    "approximate_prefix",
    "picard_map",
    "init_block_state",
    "online_picard_step",
    "online_picard_run",
    "classic_picard_run",
    "KernelKind",
    "BasisMode",
    "KernelSpec",
    "StepResult",
    "TuningError",
    "rwm_increment",
    "mwg_increment",
    "ula_increment",
    "tune_step_size",
    "StreamKey",
    "Innovation",
    "InnovationLaw",
    "innovation_at",
    "haar_basis",
    "TargetModel",
    "__version__",
]
