import math

import numpy as np
import pytest

from picardmc.kernels import (
    BasisMode,
    KernelKind,
    KernelSpec,
    TuningError,
    accepts,
    kernel_step,
    measure_acceptance,
    mwg_increment,
    proposal_jump,
    rwm_increment,
    tune_step_size,
    ula_increment,
)
from picardmc.rng import Innovation, InnovationLaw, StreamKey, innovation_at
from picardmc.targets import isotropic_gaussian

KEY = StreamKey(11)


def test_rwm_uphill_always_accepts():
    target = isotropic_gaussian(2)
    x = np.array([2.0, 0.0])
    z = np.array([-1.0, 0.0])  # towards the mode: ratio > 1
    for u in (0.0, 0.3, 0.999):
        res = rwm_increment(target, x, Innovation(u=u, z=z, step_index=0))
        assert res.accepted
        assert np.array_equal(res.increment, z)


def test_rwm_outside_support_rejects_even_at_u0():
    def log_density(x):
        return 0.0 if x[0] >= 0 else float("-inf")

    from picardmc.targets import TargetModel

    target = TargetModel(d=1, log_density=log_density)
    res = rwm_increment(target, np.array([0.5]), Innovation(u=0.0, z=np.array([-1.0]), step_index=0))
    assert not res.accepted
    assert np.array_equal(res.increment, np.zeros(1))


def test_rwm_analytic_rejection_threshold():
    # standard Gaussian d=2, x=0, z=(1,1): ratio exp(-1) ~ 0.3679: u=0.5 rejects
    target = isotropic_gaussian(2)
    z = np.array([1.0, 1.0])
    rejected = rwm_increment(target, np.zeros(2), Innovation(u=0.5, z=z, step_index=0))
    accepted = rwm_increment(target, np.zeros(2), Innovation(u=0.3, z=z, step_index=0))
    assert not rejected.accepted
    assert accepted.accepted


def test_u_zero_always_accepts_inside_support():
    target = isotropic_gaussian(1)
    res = rwm_increment(target, np.zeros(1), Innovation(u=0.0, z=np.array([50.0]), step_index=0))
    assert res.accepted


def test_mwg_standard_basis_locality():
    target = isotropic_gaussian(4)
    x = np.array([0.1, 0.2, 0.3, 0.4])
    res = mwg_increment(target, x, step_index=2, w=Innovation(u=0.0, z=0.5, step_index=2))
    assert res.accepted
    assert np.count_nonzero(res.increment) == 1
    assert res.increment[2] == 0.5


def test_mwg_d1_reduces_to_rwm():
    target = isotropic_gaussian(1)
    for u, z in [(0.3, 0.9), (0.8, -0.4), (0.99, 1.4)]:
        a = mwg_increment(target, np.array([0.2]), 0, Innovation(u=u, z=z, step_index=0))
        b = rwm_increment(target, np.array([0.2]), Innovation(u=u, z=np.array([z]), step_index=0))
        assert a.accepted == b.accepted
        assert np.array_equal(a.increment, b.increment)


def test_mwg_acceptance_invariant_to_orthogonal_moves():
    # for an isotropic Gaussian, accepted moves along other basis directions
    # do not change the acceptance indicator of direction i
    gen = np.random.Generator(np.random.PCG64(5))
    d = 6
    target = isotropic_gaussian(d, mu=1.5, sigma2=2.0)
    basis, _ = np.linalg.qr(gen.standard_normal((d, d)))
    x0 = gen.standard_normal(d)
    i = 3
    w = Innovation(u=0.42, z=0.8, step_index=i)
    base = mwg_increment(target, x0, i, w, basis=basis)
    for _ in range(20):
        coeffs = gen.standard_normal(d)
        coeffs[i] = 0.0
        moved = x0 + basis @ coeffs
        res = mwg_increment(target, moved, i, w, basis=basis)
        assert res.accepted == base.accepted


def test_ula_drift():
    target = isotropic_gaussian(2)
    res = ula_increment(
        target, np.array([2.0, 0.0]), Innovation(u=0.0, z=np.zeros(2), step_index=0), scale=0.1
    )
    assert res.accepted
    assert np.allclose(res.increment, [-0.01, 0.0])


def test_ula_needs_gradient():
    from picardmc.targets import TargetModel

    target = TargetModel(d=1, log_density=lambda x: 0.0)
    with pytest.raises(ValueError):
        ula_increment(target, np.zeros(1), Innovation(u=0.0, z=np.zeros(1), step_index=0), 0.1)


def test_ula_stationary_variance_matches_ar1():
    # X' = (1 - xi^2/2) X + xi W for the standard Gaussian: AR(1) with known
    # stationary variance xi^2 / (1 - (1 - xi^2/2)^2)
    xi = 0.5
    spec = KernelSpec(KernelKind.ULA, d=1, scale=xi)
    target = isotropic_gaussian(1)
    from picardmc.chain import sequential_simulate

    traj = sequential_simulate(spec, target, np.zeros(1), 60_000, StreamKey(3))
    phi = 1.0 - xi * xi / 2.0
    expected = xi * xi / (1.0 - phi * phi)
    observed = traj.states[5000:, 0].var()
    assert abs(observed / expected - 1.0) < 0.08


def test_proposal_jump_matches_increment_paths():
    spec = KernelSpec(KernelKind.MWG, d=3, scale=0.5, basis_mode=BasisMode.HAAR_PER_SWEEP)
    w = innovation_at(KEY, spec.innovation_law, 3, 0.5, 7)
    jump = proposal_jump(spec, w, KEY.with_stream(1))
    target = isotropic_gaussian(3)
    res = kernel_step(spec, target, np.zeros(3), target.log_density(np.zeros(3)), w,
                      basis_key=KEY.with_stream(1))
    if res.accepted:
        assert np.array_equal(res.increment, jump)


def test_accepts_edge_cases():
    assert accepts(-0.5, 0.0, 0.0)  # u = 0 accepts any finite ratio
    assert not accepts(float("-inf"), 0.0, 0.0)  # zero-density proposal rejects
    assert accepts(0.0, 0.0, 0.99)  # ratio 1 >= u always


def test_tune_recovers_optimal_scaling():
    d = 100
    target = isotropic_gaussian(d)
    spec = KernelSpec(KernelKind.RWM, d=d, scale=1.0 / math.sqrt(d))
    tuned = tune_step_size(spec, target, np.zeros(d), StreamKey(7), warmup=4000)
    assert abs(tuned.scale - 2.38 / math.sqrt(d)) / (2.38 / math.sqrt(d)) < 0.30


def test_tuned_acceptance_in_band():
    d = 30
    target = isotropic_gaussian(d)
    spec = KernelSpec(KernelKind.RWM, d=d, scale=0.7)
    tuned = tune_step_size(spec, target, np.zeros(d), StreamKey(9), warmup=3000)
    acc = measure_acceptance(tuned, target, np.zeros(d), StreamKey(10), 4000)
    assert 0.234 - 0.07 <= acc <= 0.234 + 0.07


def test_acceptance_monotone_in_scale():
    d = 10
    target = isotropic_gaussian(d)
    rates = []
    for scale in (0.2, 0.4, 0.8):
        spec = KernelSpec(KernelKind.RWM, d=d, scale=scale)
        rates.append(measure_acceptance(spec, target, np.zeros(d), StreamKey(21), 4000))
    assert rates[0] > rates[1] > rates[2]


def test_tune_rejects_short_warmup_and_ula():
    target = isotropic_gaussian(2)
    with pytest.raises(ValueError):
        tune_step_size(KernelSpec(KernelKind.RWM, 2, 0.5), target, np.zeros(2), KEY, warmup=10)
    with pytest.raises(ValueError):
        tune_step_size(KernelSpec(KernelKind.ULA, 2, 0.5), target, np.zeros(2), KEY, warmup=500)
