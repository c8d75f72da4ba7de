"""Experiment presets.

Each preset reproduces one of the benchmark measurements at desk scale
(the published experiments use N = 1e4..1e6; defaults here shrink N and rep
counts so the full suite runs in minutes, with correspondingly looser
tolerances). run_experiment executes a preset across seeds and writes
report.csv (one row per seed and setting) plus rounds.csv (per-round history
of the first run).

Preset-specific row encodings, since the report schema is fixed:
  tails: the initial radius s is appended to the experiment name
         (tails_s800) and L holds the measured first-round commit depth.
  verify_thm1: one row per probed step index i (experiment verify_thm1_i50);
         M holds the incorrect-guess probability, E its binomial SE.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ..chain import sequential_moments, sequential_simulate
from ..engine import (
    RunRecord,
    agreement_prefix,
    online_picard_run,
    picard_map,
)
from ..kernels import BasisMode, KernelKind, KernelSpec, TuningError, tune_step_size
from ..rng import DATA_STREAM, INIT_STREAM, StreamKey, derive_seed, innovation_at
from ..targets import (
    RegressionModel,
    TargetModel,
    generate_regression_data,
    isotropic_gaussian,
    make_regression_target,
    make_sir_target,
    sample_sir_initial_state,
    sir_forward_simulate,
)
from .metrics import (
    incorrect_guess_probability,
    moment_errors_from_stats,
    speedup_metric,
)
from .reports import write_report, write_rounds

KERNEL_CHOICES: Dict[str, Tuple[KernelKind, BasisMode]] = {
    "rwm": (KernelKind.RWM, BasisMode.STANDARD),
    "mwg-standard": (KernelKind.MWG, BasisMode.STANDARD),
    "mwg-haar": (KernelKind.MWG, BasisMode.HAAR_PER_SWEEP),
}

REGRESSION_MODELS = {
    "linear": RegressionModel.LINEAR,
    "logistic": RegressionModel.LOGISTIC,
    "poisson": RegressionModel.POISSON,
}


@dataclass
class ExperimentConfig:
    """Flat configuration shared by all presets; presets read what they need.

    Zero values for K and reps mean 'use the preset default'.
    """

    experiment: str
    kernel: str = "rwm"
    target: str = ""  # empty means the preset's canonical target
    d: int = 0
    K: int = 0
    N: int = 2000
    r: float = 0.0
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5)
    workers: int = 1
    out: str = "picardmc-out"
    reps: int = 0
    rounds: int = 20
    n_configs: int = 100
    d_list: Tuple[int, ...] = (64, 256)
    k_list: Tuple[int, ...] = ()
    r_list: Tuple[float, ...] = (0.0, 0.05, 1.0)
    radii: Tuple[float, ...] = (0.0, 50.0, 200.0, 800.0)
    sir_m: int = 200
    sir_beta: float = 0.001
    sir_gamma: float = 0.15
    sir_reference_steps: int = 0
    tune_warmup: int = 2000
    schema_version: int = 1

    def __post_init__(self) -> None:
        self.experiment = self.experiment.strip().lower()


_TUPLE_FIELDS = {"seeds", "d_list", "k_list", "r_list", "radii"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key = value config format (# starts a comment)."""
    values: Dict[str, object] = {}
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        name, _, value = (part.strip() for part in line.partition("="))
        if name not in fields:
            raise ValueError(f"config line {lineno}: unknown key {name!r}")
        if name in _TUPLE_FIELDS:
            parts = [p for p in value.split(",") if p.strip()]
            cast = float if name in ("r_list", "radii") else int
            values[name] = tuple(cast(p) for p in parts)
        elif name in ("r", "sir_beta", "sir_gamma"):
            values[name] = float(value)
        elif name in ("experiment", "kernel", "target", "out"):
            values[name] = value
        else:
            values[name] = int(value)
    if "experiment" not in values:
        raise ValueError("config must set 'experiment'")
    cfg = ExperimentConfig(**values)  # type: ignore[arg-type]
    if cfg.schema_version != 1:
        raise ValueError(f"unsupported schema_version {cfg.schema_version}")
    return cfg


def build_kernel_spec(kernel: str, d: int, scale: float) -> KernelSpec:
    try:
        kind, mode = KERNEL_CHOICES[kernel]
    except KeyError:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(KERNEL_CHOICES)}")
    return KernelSpec(kind=kind, d=d, scale=scale, basis_mode=mode)


def build_target(name: str, d: int, seed: int) -> Tuple[TargetModel, np.ndarray]:
    """Target plus its conventional initial state.

    Linear regression starts at the posterior mean, logistic/Poisson at the
    data-generating coefficients, the Gaussian at its mode.
    """
    if name == "gaussian":
        target = isotropic_gaussian(d)
        return target, np.zeros(d)
    if name in REGRESSION_MODELS:
        data = generate_regression_data(
            REGRESSION_MODELS[name], d, StreamKey(seed, DATA_STREAM)
        )
        target = make_regression_target(data)
        if name == "linear":
            x0 = target.analytic_moments[0].copy()
        else:
            x0 = data.x_true.copy()
        return target, x0
    raise ValueError(f"unknown target {name!r}")


def initial_scale(kernel: str, d: int, coord_sd: float = 1.0) -> float:
    """Starting point for step-size tuning: the classical optimal-scaling
    guess for RWM, a coordinate-sized jump for MwG."""
    if kernel == "rwm":
        return 2.38 * coord_sd / math.sqrt(d)
    return coord_sd


def _typical_sd(target: TargetModel) -> float:
    if target.analytic_moments is not None:
        return float(np.mean(target.analytic_moments[1]))
    return 0.5


def _tuned_spec(
    kernel: str, target: TargetModel, x0: np.ndarray, seed: int, warmup: int
) -> KernelSpec:
    spec = build_kernel_spec(kernel, target.d, initial_scale(kernel, target.d, _typical_sd(target)))
    return tune_step_size(spec, target, x0, StreamKey(seed), warmup)


def _row(cfg: ExperimentConfig, **overrides) -> Dict:
    row = {
        "experiment": cfg.experiment,
        "seed": 0,
        "kernel": cfg.kernel,
        "target": cfg.target,
        "d": cfg.d,
        "K": cfg.K,
        "N": cfg.N,
        "r": cfg.r,
        "J": 0,
        "L": 0,
        "G_hat": float("nan"),
        "M": float("nan"),
        "E": float("nan"),
        "acceptance": float("nan"),
    }
    row.update(overrides)
    return row


PresetResult = Tuple[List[Dict], List[str], Optional[RunRecord]]


def _oracle_equivalence(cfg: ExperimentConfig) -> PresetResult:
    """Criterion: over random small configurations, the exact engine output is
    bit-identical to the sequential simulator."""
    n_cases = cfg.n_configs
    master = cfg.seeds[0]
    gen = np.random.Generator(np.random.PCG64(derive_seed(master, 9100)))
    kernels = list(KERNEL_CHOICES)
    targets = ["gaussian", "linear", "logistic"]
    rows: List[Dict] = []
    problems: List[str] = []
    first_record: Optional[RunRecord] = None
    for case in range(n_cases):
        d = int(gen.integers(2, 33))
        n_steps = int(gen.integers(10, 501))
        k = int(gen.integers(1, 17))
        kernel = kernels[case % len(kernels)]
        target_name = targets[(case // len(kernels)) % len(targets)]
        seed = derive_seed(master, case)
        target, x0 = build_target(target_name, d, seed)
        scale = initial_scale(kernel, d, _typical_sd(target)) * float(gen.uniform(0.5, 2.0))
        spec = build_kernel_spec(kernel, d, scale)
        key = StreamKey(seed)
        trajectory = sequential_simulate(spec, target, x0, n_steps, key)
        x_final, record = online_picard_run(
            spec, target, x0, n_steps, k, key, r=0.0,
            workers=cfg.workers, store_trajectory=True,
        )
        exact = (
            np.array_equal(trajectory.states, record.trajectory.states)
            and np.array_equal(trajectory.accept_flags, record.trajectory.accept_flags)
            and np.array_equal(trajectory.states[-1], x_final)
        )
        if not exact:
            problems.append(
                f"oracle mismatch: case={case} kernel={kernel} target={target_name} "
                f"d={d} N={n_steps} K={k} seed={seed}"
            )
        if first_record is None:
            first_record = record
        rows.append(
            _row(
                cfg, seed=seed, kernel=kernel, target=target_name, d=d, K=k,
                N=n_steps, J=record.J, L=record.L, G_hat=speedup_metric(record),
                acceptance=record.acceptance,
            )
        )
    return rows, problems, first_record


def _verify_prop5(cfg: ExperimentConfig) -> PresetResult:
    """MwG + per-sweep Haar basis + isotropic Gaussian commits full windows:
    G = K every round and L = jK exactly, while staying bit-exact.

    The run uses r = 1 so the window advances on the jK schedule of the
    statement (each window then lies inside a single basis sweep); exactness
    of those full-window commits is the verified claim.
    """
    d = cfg.d or 50
    k = cfg.K or 25
    n_rounds = cfg.rounds
    n_steps = n_rounds * k
    rows: List[Dict] = []
    problems: List[str] = []
    first_record: Optional[RunRecord] = None
    for seed in cfg.seeds:
        target = isotropic_gaussian(d)
        init_gen = np.random.Generator(np.random.PCG64(derive_seed(seed, 51)))
        x0 = init_gen.standard_normal(d)
        scale = 2.38 / math.sqrt(d)
        spec = KernelSpec(KernelKind.MWG, d=d, scale=scale, basis_mode=BasisMode.HAAR_PER_SWEEP)
        key = StreamKey(seed)
        x_final, record = online_picard_run(
            spec, target, x0, n_steps, k, key, r=1.0,
            workers=cfg.workers, store_trajectory=True,
        )
        trajectory = sequential_simulate(spec, target, x0, n_steps, key)
        if not all(g == k for g in record.commits):
            problems.append(f"prop5 seed={seed}: commits {record.commits} not all K={k}")
        for j, (_, _, l_value, _) in enumerate(record.rounds, start=1):
            if l_value != j * k:
                problems.append(f"prop5 seed={seed}: L at round {j} is {l_value}, not {j * k}")
        if not (
            np.array_equal(trajectory.states, record.trajectory.states)
            and np.array_equal(trajectory.accept_flags, record.trajectory.accept_flags)
        ):
            problems.append(f"prop5 seed={seed}: full-window commits deviate from the oracle")
        if first_record is None:
            first_record = record
        rows.append(
            _row(
                cfg, seed=seed, kernel="mwg-haar", target="gaussian", d=d, K=k,
                N=n_steps, r=1.0, J=record.J, L=record.L,
                G_hat=speedup_metric(record), acceptance=record.acceptance,
            )
        )
    return rows, problems, first_record


def _scaling_d(cfg: ExperimentConfig) -> PresetResult:
    """Speedup growth with dimension at K = d (linear-regression target)."""
    rows: List[Dict] = []
    problems: List[str] = []
    first_record: Optional[RunRecord] = None
    target_name = cfg.target or "linear"
    for d in cfg.d_list:
        for seed in cfg.seeds:
            target, x0 = build_target(target_name, d, seed)
            try:
                spec = _tuned_spec(cfg.kernel, target, x0, seed, cfg.tune_warmup)
            except TuningError as exc:
                problems.append(f"scaling_d d={d} seed={seed}: {exc}")
                continue
            key = StreamKey(seed)
            burn = cfg.N // 5
            _, record = online_picard_run(
                spec, target, x0, cfg.N, d, key, r=cfg.r,
                workers=cfg.workers, burn_in=burn,
            )
            m = e = float("nan")
            if target.analytic_moments is not None and record.sd is not None:
                m, e = moment_errors_from_stats(record.mean, record.sd, target.analytic_moments)
            if first_record is None:
                first_record = record
            rows.append(
                _row(
                    cfg, seed=seed, target=target_name, d=d, K=d, J=record.J,
                    L=record.L, G_hat=speedup_metric(record), M=m, E=e,
                    acceptance=record.acceptance,
                )
            )
    return rows, problems, first_record


def _scaling_k(cfg: ExperimentConfig) -> PresetResult:
    """Speedup as a function of the window size K at fixed dimension."""
    d = cfg.d or 128
    k_values = cfg.k_list or (2, math.isqrt(d) + (0 if math.isqrt(d) ** 2 == d else 1), d, 2 * d)
    rows: List[Dict] = []
    problems: List[str] = []
    first_record: Optional[RunRecord] = None
    target_name = cfg.target or "linear"
    for seed in cfg.seeds:
        target, x0 = build_target(target_name, d, seed)
        try:
            spec = _tuned_spec(cfg.kernel, target, x0, seed, cfg.tune_warmup)
        except TuningError as exc:
            problems.append(f"scaling_k seed={seed}: {exc}")
            continue
        key = StreamKey(seed)
        for k in k_values:
            _, record = online_picard_run(
                spec, target, x0, cfg.N, int(k), key, r=cfg.r, workers=cfg.workers,
            )
            if first_record is None:
                first_record = record
            rows.append(
                _row(
                    cfg, seed=seed, target=target_name, d=d, K=int(k),
                    J=record.J, L=record.L, G_hat=speedup_metric(record),
                    acceptance=record.acceptance,
                )
            )
    return rows, problems, first_record


def _tolerance_sweep(cfg: ExperimentConfig) -> PresetResult:
    """Speedup and moment bias of the approximate engine across tolerances."""
    d = cfg.d or 200
    k = cfg.K or d
    rows: List[Dict] = []
    problems: List[str] = []
    first_record: Optional[RunRecord] = None
    target_name = cfg.target or "linear"
    for seed in cfg.seeds:
        target, x0 = build_target(target_name, d, seed)
        try:
            spec = _tuned_spec(cfg.kernel, target, x0, seed, cfg.tune_warmup)
        except TuningError as exc:
            problems.append(f"tolerance_sweep seed={seed}: {exc}")
            continue
        key = StreamKey(seed)
        burn = cfg.N // 5
        for r in cfg.r_list:
            _, record = online_picard_run(
                spec, target, x0, cfg.N, k, key, r=float(r),
                workers=cfg.workers, burn_in=burn,
            )
            m = e = float("nan")
            if target.analytic_moments is not None and record.sd is not None:
                m, e = moment_errors_from_stats(record.mean, record.sd, target.analytic_moments)
            if first_record is None:
                first_record = record
            rows.append(
                _row(
                    cfg, seed=seed, target=target_name, d=d, K=k, r=float(r),
                    J=record.J, L=record.L, G_hat=speedup_metric(record),
                    M=m, E=e, acceptance=record.acceptance,
                )
            )
    return rows, problems, first_record


def _tails(cfg: ExperimentConfig) -> PresetResult:
    """First-round convergence depth of the Picard map started in the tails.

    For each radius s, x0 is uniform on the sphere of radius s around the
    posterior mode; one Picard application from the constant trajectory is
    compared against the oracle and L1 = depth of agreeing increments.
    The step size is tuned once, in stationarity at the mode, with a
    preliminary run of 1e4 steps.
    """
    d = cfg.d or 50
    k = cfg.K or d
    reps = cfg.reps or 10
    seed = cfg.seeds[0]
    target_name = cfg.target or "logistic"
    target, x_start = build_target(target_name, d, seed)
    opt = minimize(
        lambda x: -target.log_density(x),
        x_start,
        jac=lambda x: -target.gradient(x),
        method="L-BFGS-B",
    )
    mode = opt.x
    try:
        spec = _tuned_spec(cfg.kernel, target, mode, seed, warmup=10_000)
    except TuningError as exc:
        return [], [f"tails: tuning failed: {exc}"], None
    rows: List[Dict] = []
    for radius_index, radius in enumerate(cfg.radii):
        for rep in range(reps):
            rep_key = StreamKey(derive_seed(seed, radius_index, rep))
            direction_gen = np.random.Generator(
                np.random.PCG64(derive_seed(seed, radius_index, rep, 3))
            )
            direction = direction_gen.standard_normal(d)
            direction /= np.linalg.norm(direction)
            x0 = mode + radius * direction
            oracle = sequential_simulate(spec, target, x0, k, rep_key)
            w_bar = [
                innovation_at(rep_key, spec.innovation_law, d, spec.scale, i)
                for i in range(k)
            ]
            _, flags, _, _ = picard_map(
                np.tile(x0, (k + 1, 1)), w_bar, spec, target, rep_key,
                flags_prev=np.zeros(k, dtype=bool),
                lp_head=target.log_density(x0),
            )
            l1 = agreement_prefix(flags, oracle.accept_flags)
            rows.append(
                _row(
                    cfg, experiment=f"tails_s{radius:g}", seed=rep,
                    kernel=cfg.kernel, target=target_name, d=d, K=k, N=k,
                    J=1, L=l1, G_hat=float(l1),
                    acceptance=oracle.acceptance_rate,
                )
            )
    return rows, [], None


def _sir(cfg: ExperimentConfig) -> PresetResult:
    """Online Picard on the SIR latent infection-time posterior.

    The forward simulator is rerun over derived seeds until the epidemic has
    a usable size (R = 4/3 makes small outbreaks likely). K = floor(sqrt(d));
    burn-in N/2.
    """
    base = cfg.seeds[0]
    data = None
    for attempt in range(200):
        candidate = sir_forward_simulate(
            cfg.sir_m, cfg.sir_beta, cfg.sir_gamma,
            StreamKey(derive_seed(base, 606, attempt), DATA_STREAM),
        )
        if 60 <= candidate.d <= 160:
            data = candidate
            break
    if data is None:
        return [], ["sir: no forward simulation of usable size in 200 attempts"], None
    d = data.d
    target = make_sir_target(data)
    x0 = sample_sir_initial_state(data, StreamKey(derive_seed(base, 607), INIT_STREAM))
    k = cfg.K or math.isqrt(d)
    reference = None
    if cfg.sir_reference_steps > 0:
        ref_spec = _sir_tuned(cfg, "rwm", target, data, base)
        ref_mean, ref_sd, _ = sequential_moments(
            ref_spec, target, data.infection_times, cfg.sir_reference_steps,
            StreamKey(derive_seed(base, 608)), burn_in=cfg.sir_reference_steps // 5,
        )
        reference = (ref_mean, ref_sd)
    rows: List[Dict] = []
    problems: List[str] = []
    first_record: Optional[RunRecord] = None
    for kernel in ("rwm", "mwg-standard"):
        try:
            spec = _sir_tuned(cfg, kernel, target, data, base)
        except TuningError as exc:
            problems.append(f"sir kernel={kernel}: {exc}")
            continue
        _, record = online_picard_run(
            spec, target, x0, cfg.N, k, StreamKey(derive_seed(base, 610)),
            r=cfg.r, workers=cfg.workers, burn_in=cfg.N // 2,
        )
        m = e = float("nan")
        if reference is not None and record.sd is not None:
            m, e = moment_errors_from_stats(record.mean, record.sd, reference)
        if first_record is None:
            first_record = record
        rows.append(
            _row(
                cfg, seed=base, kernel=kernel, target="sir", d=d, K=k,
                J=record.J, L=record.L, G_hat=speedup_metric(record),
                M=m, E=e, acceptance=record.acceptance,
            )
        )
    return rows, problems, first_record


def _sir_tuned(
    cfg: ExperimentConfig, kernel: str, target: TargetModel, data, base: int
) -> KernelSpec:
    """Tune after a short drift run so the adaptation happens in the
    posterior bulk rather than along the initialization transient."""
    duration_sd = 1.0 / cfg.sir_gamma
    spec = build_kernel_spec(kernel, data.d, initial_scale(kernel, data.d, duration_sd))
    x0 = sample_sir_initial_state(data, StreamKey(derive_seed(base, 609), INIT_STREAM))
    warm = sequential_simulate(
        spec, target, x0, cfg.tune_warmup, StreamKey(derive_seed(base, 612))
    ).states[-1]
    return tune_step_size(spec, target, warm, StreamKey(derive_seed(base, 611)), cfg.tune_warmup)


def _verify_thm1(cfg: ExperimentConfig) -> PresetResult:
    """Shape of the incorrect-guess probability: roughly linear in i/d."""
    d = cfg.d or 400
    reps = cfg.reps or 1000
    j = math.ceil(math.log(d))
    i_values = sorted({0, d // 32, d // 16, d // 8})
    target = isotropic_gaussian(d)
    spec = KernelSpec(KernelKind.RWM, d=d, scale=2.38 / math.sqrt(d))
    curve = incorrect_guess_probability(
        spec, target, i_values, j, reps, StreamKey(cfg.seeds[0]),
        x0_sampler=lambda gen: gen.standard_normal(d),
    )
    rows = [
        _row(
            cfg, experiment=f"verify_thm1_i{i}", seed=cfg.seeds[0],
            kernel="rwm", target="gaussian", d=d, K=max(i_values) + 1, N=j,
            J=reps, L=i, M=p_hat, E=se,
        )
        for i, p_hat, se in curve
    ]
    return rows, [], None


PRESETS: Dict[str, Callable[[ExperimentConfig], PresetResult]] = {
    "oracle_equivalence": _oracle_equivalence,
    "verify_prop5": _verify_prop5,
    "scaling_d": _scaling_d,
    "scaling_k": _scaling_k,
    "tolerance_sweep": _tolerance_sweep,
    "tails": _tails,
    "sir": _sir,
    "verify_thm1": _verify_thm1,
}


def run_experiment(cfg: ExperimentConfig) -> Tuple[List[Dict], List[str]]:
    """Execute the configured preset, write report.csv and rounds.csv into
    cfg.out, and return (rows, problems). Empty problems means success."""
    try:
        preset = PRESETS[cfg.experiment]
    except KeyError:
        raise ValueError(
            f"unknown experiment {cfg.experiment!r}; choose from {sorted(PRESETS)}"
        )
    rows, problems, first_record = preset(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.csv", rows)
    if first_record is not None:
        write_rounds(out / "rounds.csv", first_record)
    return rows, problems
