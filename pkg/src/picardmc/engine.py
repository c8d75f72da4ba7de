"""Online Picard engine: parallel-in-time simulation of Metropolis chains.

One round applies the Picard map to a length-K window of the chain: the K
proposal log-densities are evaluated concurrently, then states are rebuilt by
a strict left-to-right prefix sum from the committed window head. Agreement
between the window's claimed acceptance flags (the flags that built the
candidate states) and the freshly computed ones tells how far the candidate
already coincides with the true chain: with shared innovations and fixed
summation order, flag-prefix agreement implies bit-exact state agreement.

Commit rule: a round commits min(prefix + 1, K) steps. Flags agreeing on the
first `prefix` positions verify the candidate there; the increment at
position `prefix` itself was evaluated at a verified (hence exact) state, so
it is exact too - the window head is always one exact state ahead. This
gives G >= 1 every round, hence at most N rounds for N steps, with the
committed prefix bit-identical to the sequential simulator.

Approximate mode (r > 0) relaxes the commit: it tolerates a running fraction
<= r of mistakes, where a mistake at position s means the increment computed
at the round's output state disagrees with the one computed at its candidate
state - i.e. the guess at s is still churning between refinements. Measuring
this takes a second evaluation pass over the output states, so approximate
rounds cost 2K target evaluations (still a constant 2 per processor per
round); positions whose guesses have stabilized commit in bulk, which is
where the approximate variant's extra throughput comes from.

Bookkeeping keeps the exact round's target cost at exactly K evaluations:
the window states' log-densities are chained from the head value because an
accepted claim means the next window state *is* the previously evaluated
proposal point, bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chain import RunningMoments, Trajectory
from .kernels import BASIS_STREAM, KernelKind, KernelSpec, accepts, proposal_jump
from .rng import Innovation, StreamKey, innovation_at
from .targets.base import EvalCounter, TargetModel

NEG_INF = float("-inf")


def agreement_prefix(old_flags: Sequence[bool], new_flags: Sequence[bool]) -> int:
    """Longest prefix on which the two flag vectors agree."""
    old = np.asarray(old_flags, dtype=bool)
    new = np.asarray(new_flags, dtype=bool)
    if old.shape != new.shape:
        raise ValueError(f"flag shapes differ: {old.shape} vs {new.shape}")
    disagreements = np.nonzero(old != new)[0]
    return int(disagreements[0]) if disagreements.size else int(old.size)


def approximate_prefix(
    old_flags: Sequence[bool], new_flags: Sequence[bool], r: float
) -> int:
    """Largest i such that the running disagreement fraction stays <= r.

    With A_l = #{s < l : flags disagree} / l, returns
    sup{1 <= i <= K : A_l <= r for all l <= i} (0 if even i = 1 fails).
    Coincides with agreement_prefix at r = 0 and is non-decreasing in r.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    old = np.asarray(old_flags, dtype=bool)
    new = np.asarray(new_flags, dtype=bool)
    if old.shape != new.shape:
        raise ValueError(f"flag shapes differ: {old.shape} vs {new.shape}")
    disagree = old != new
    k = disagree.size
    fractions = np.cumsum(disagree) / np.arange(1, k + 1)
    failing = np.nonzero(fractions > r)[0]
    return int(failing[0]) if failing.size else k


@dataclass
class PicardBlockState:
    """The engine's entire runtime state: one rolling window of the chain.

    x_bar[0] is a committed state equal to the sequential chain at step L
    (exact mode); x_bar is chained: x_bar[i+1] = x_bar[i] + jump_i if
    flags_prev[i] else x_bar[i], with jump_i derived from w_bar[i]
    (tail-fill positions claim rejections, matching the constant extension).
    lp_head caches log pi(x_bar[0]).
    """

    x_bar: np.ndarray  # (K+1, d)
    w_bar: List[Innovation]  # length K
    flags_prev: np.ndarray  # (K,) bool
    lp_head: float
    L: int
    J: int

    @property
    def K(self) -> int:
        return len(self.w_bar)

    @property
    def global_index(self) -> int:
        return self.L


@dataclass
class RoundOutcome:
    """What one Picard round produced."""

    new_states: np.ndarray  # (K+1, d)
    new_flags: np.ndarray  # (K,) bool
    G: int  # committed steps this round
    prefix: int  # raw/tolerated agreement prefix behind G
    mistakes_prefix: Optional[np.ndarray] = None  # A_l fractions, approximate mode


@dataclass
class RunRecord:
    """Per-run accounting: rounds, commit sizes, evaluation counts, moments."""

    n_steps: int
    K: int
    r: float
    J: int = 0
    L: int = 0
    evals: int = 0
    acceptance: float = 0.0
    commits: List[int] = field(default_factory=list)
    rounds: List[Tuple[int, int, int, int]] = field(default_factory=list)  # round, G, L, evals
    mean: Optional[np.ndarray] = None
    sd: Optional[np.ndarray] = None
    trajectory: Optional[Trajectory] = None


def _chain_state_logdensities(
    lp_head: float, prop_lps: np.ndarray, chain_flags: np.ndarray
) -> np.ndarray:
    """log pi at each state of a chained window, with no target evaluations.

    An accepted chain flag at i means state i+1 equals the proposal point
    state_i + jump_i whose log-density prop_lps[i] was just computed.
    """
    k = chain_flags.size
    lp = np.empty(k + 1)
    lp[0] = lp_head
    for i in range(k):
        lp[i + 1] = prop_lps[i] if chain_flags[i] else lp[i]
    return lp


def _proposal_lps(
    states: np.ndarray,
    jumps: Sequence[np.ndarray],
    target,
    workers: int,
    pool: Optional[ThreadPoolExecutor],
) -> np.ndarray:
    """log pi at states[i] + jumps[i], evaluated concurrently, merged in index
    order so results are bit-identical for every worker count."""
    k = len(jumps)

    def one(i: int) -> float:
        return target.log_density(states[i] + jumps[i])

    if pool is not None and workers > 1:
        return np.array(list(pool.map(one, range(k))))
    return np.array([one(i) for i in range(k)])


def picard_map(
    x_bar: np.ndarray,
    w_bar: Sequence[Innovation],
    spec: KernelSpec,
    target,
    key: StreamKey,
    workers: int = 1,
    pool: Optional[ThreadPoolExecutor] = None,
    flags_prev: Optional[np.ndarray] = None,
    lp_head: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One Picard map application: K concurrent evaluations, one prefix sum.

    Returns (new_states, new_flags, proposal_lps, state_lps). When the
    window's claimed flags and head log-density are supplied, state
    log-densities are chained instead of re-evaluated and the application
    costs exactly K target evaluations; otherwise each window state is
    evaluated directly (K extra calls).
    """
    if spec.kind is KernelKind.ULA:
        raise ValueError("the Picard engine supports Metropolis kernels only")
    k = len(w_bar)
    if x_bar.shape[0] != k + 1:
        raise ValueError(f"x_bar has {x_bar.shape[0]} states, expected {k + 1}")
    basis_key = key.with_stream(BASIS_STREAM)
    jumps = [proposal_jump(spec, w, basis_key) for w in w_bar]
    prop_lps = _proposal_lps(x_bar, jumps, target, workers, pool)

    if flags_prev is not None and lp_head is not None:
        state_lps = _chain_state_logdensities(lp_head, prop_lps, flags_prev)
    else:
        state_lps = np.array([target.log_density(x_bar[i]) for i in range(k + 1)])

    new_flags = np.empty(k, dtype=bool)
    new_states = np.empty_like(x_bar)
    new_states[0] = x_bar[0]
    for i in range(k):
        accepted = accepts(prop_lps[i], state_lps[i], w_bar[i].u)
        new_flags[i] = accepted
        new_states[i + 1] = new_states[i] + jumps[i] if accepted else new_states[i]
    return new_states, new_flags, prop_lps, state_lps


def init_block_state(
    spec: KernelSpec, target, x0: np.ndarray, K: int, key: StreamKey
) -> PicardBlockState:
    """Constant-trajectory initialization: the window claims K rejections."""
    x0 = np.asarray(x0, dtype=float)
    lp0 = target.log_density(x0)
    if lp0 == NEG_INF:
        raise ValueError("initial state has zero target density")
    w_bar = [
        innovation_at(key, spec.innovation_law, spec.d, spec.scale, i) for i in range(K)
    ]
    return PicardBlockState(
        x_bar=np.tile(x0, (K + 1, 1)),
        w_bar=w_bar,
        flags_prev=np.zeros(K, dtype=bool),
        lp_head=lp0,
        L=0,
        J=0,
    )


def online_picard_step(
    state: PicardBlockState,
    spec: KernelSpec,
    target,
    key: StreamKey,
    r: float = 0.0,
    workers: int = 1,
    pool: Optional[ThreadPoolExecutor] = None,
) -> Tuple[PicardBlockState, RoundOutcome]:
    """One round: map, agree, commit, shift.

    Exact mode (r == 0): flag agreement against the window's claims verifies
    the candidate prefix; the increment at the first unverified position was
    itself computed at a verified state, so the round commits
    min(agreement_prefix + 1, K) exact steps.

    Approximate mode (r > 0): a second evaluation pass recomputes the
    increments at the round's output states; positions where output and
    candidate increments disagree are the running mistakes, and the round
    commits min(approximate_prefix + 1, K) of the output chain.

    The window then shifts left by the commit, the vacated tail is filled
    with the last computed state and fresh innovations, and L advances.
    """
    k = state.K
    lp_head = state.lp_head

    new_states, new_flags, prop_lps, _ = picard_map(
        state.x_bar,
        state.w_bar,
        spec,
        target,
        key,
        workers=workers,
        pool=pool,
        flags_prev=state.flags_prev,
        lp_head=lp_head,
    )

    mistakes = None
    if r == 0.0:
        prefix = agreement_prefix(state.flags_prev, new_flags)
        commit = min(prefix + 1, k)
        # output equals the candidate through the verified prefix, so the
        # new head's log pi chains from this round's proposal values
        lp_new_head = lp_head
        for s in range(commit):
            if new_flags[s]:
                lp_new_head = prop_lps[s]
    else:
        basis_key = key.with_stream(BASIS_STREAM)
        jumps = [proposal_jump(spec, w, basis_key) for w in state.w_bar]
        prop2_lps = _proposal_lps(new_states, jumps, target, workers, pool)
        out_lps = _chain_state_logdensities(lp_head, prop2_lps, new_flags)
        output_flags = np.array(
            [
                accepts(prop2_lps[i], out_lps[i], state.w_bar[i].u)
                for i in range(k)
            ]
        )
        prefix = approximate_prefix(new_flags, output_flags, r)
        commit = min(prefix + 1, k)
        mistakes = np.cumsum(new_flags != output_flags) / np.arange(1, k + 1)
        lp_new_head = out_lps[commit]

    keep = k - commit
    new_L = state.L + commit
    x_bar = np.empty_like(state.x_bar)
    x_bar[: keep + 1] = new_states[commit:]
    x_bar[keep + 1 :] = new_states[k]
    w_bar = list(state.w_bar[commit:])
    for idx in range(state.L + k, new_L + k):
        w_bar.append(innovation_at(key, spec.innovation_law, spec.d, spec.scale, idx))
    flags_prev = np.concatenate([new_flags[commit:], np.zeros(commit, dtype=bool)])

    next_state = PicardBlockState(
        x_bar=x_bar,
        w_bar=w_bar,
        flags_prev=flags_prev,
        lp_head=lp_new_head,
        L=new_L,
        J=state.J + 1,
    )
    outcome = RoundOutcome(
        new_states=new_states,
        new_flags=new_flags,
        G=commit,
        prefix=prefix,
        mistakes_prefix=mistakes,
    )
    return next_state, outcome


def online_picard_run(
    spec: KernelSpec,
    target: TargetModel,
    x0: np.ndarray,
    n_steps: int,
    K: int,
    key: StreamKey,
    r: float = 0.0,
    workers: int = 1,
    burn_in: int = 0,
    store_trajectory: bool = False,
) -> Tuple[np.ndarray, RunRecord]:
    """Simulate N steps with the Online Picard algorithm.

    Returns the state at global step N and the run record. The committed
    trajectory (stored when store_trajectory is set) is bit-identical to
    sequential_simulate for r = 0; running moments over post-burn-in states
    are always accumulated.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    counting = EvalCounter(target)
    state = init_block_state(spec, counting, x0, K, key)
    record = RunRecord(n_steps=n_steps, K=K, r=r)
    moments = RunningMoments(spec.d)
    x0 = np.asarray(x0, dtype=float)
    if burn_in == 0:
        moments.add(x0)
    states_out: List[np.ndarray] = [x0[np.newaxis, :].copy()] if store_trajectory else []
    flags_out: List[np.ndarray] = []
    accepted = 0
    x_final: Optional[np.ndarray] = None

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while state.L < n_steps:
            l_prev = state.L
            state, outcome = online_picard_step(
                state, spec, counting, key, r=r, workers=workers, pool=pool
            )
            usable = min(outcome.G, n_steps - l_prev)
            committed = outcome.new_states[1 : usable + 1]
            committed_flags = outcome.new_flags[:usable]
            accepted += int(np.sum(committed_flags))
            first_kept = max(burn_in + 1 - (l_prev + 1), 0)
            if first_kept < usable:
                moments.add_batch(committed[first_kept:])
            if store_trajectory:
                states_out.append(committed.copy())
                flags_out.append(committed_flags.copy())
            if l_prev + usable >= n_steps >= l_prev + 1:
                x_final = committed[n_steps - l_prev - 1].copy()
            record.commits.append(outcome.G)
            record.rounds.append(
                (state.J, outcome.G, state.L, counting.count - 1)
            )
    finally:
        if pool is not None:
            pool.shutdown()

    record.J = state.J
    record.L = state.L
    record.evals = counting.count - 1  # beyond the cached initial evaluation
    record.acceptance = accepted / n_steps
    record.mean = moments.mean()
    record.sd = moments.sd() if moments.count >= 2 else None
    if store_trajectory:
        record.trajectory = Trajectory(
            states=np.vstack(states_out)[: n_steps + 1],
            accept_flags=np.concatenate(flags_out)[:n_steps],
        )
    assert x_final is not None
    return x_final, record


def classic_picard_run(
    spec: KernelSpec,
    target: TargetModel,
    x0: np.ndarray,
    n_steps: int,
    K: int,
    key: StreamKey,
    workers: int = 1,
    store_trajectory: bool = False,
) -> Tuple[np.ndarray, RunRecord]:
    """Block-sequential baseline: iterate the Picard map on each K-block until
    the whole block reaches its fixed point, then move to the next block.

    Output equals the sequential oracle; J (map applications) is never smaller
    than the online algorithm's on the same inputs.
    """
    if K < 1 or n_steps < 1:
        raise ValueError("K and n_steps must be >= 1")
    counting = EvalCounter(target)
    x = np.asarray(x0, dtype=float)
    lp = counting.log_density(x)
    if lp == NEG_INF:
        raise ValueError("initial state has zero target density")
    record = RunRecord(n_steps=n_steps, K=K, r=0.0)
    states_out: List[np.ndarray] = [x[np.newaxis, :].copy()] if store_trajectory else []
    flags_out: List[np.ndarray] = []
    accepted = 0
    x_final: Optional[np.ndarray] = None
    moments = RunningMoments(spec.d)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        L = 0
        while L < n_steps:
            w_block = [
                innovation_at(key, spec.innovation_law, spec.d, spec.scale, L + i)
                for i in range(K)
            ]
            x_bar = np.tile(x, (K + 1, 1))
            flags_prev = np.zeros(K, dtype=bool)
            applications = 0
            while True:
                new_states, new_flags, prop_lps, _ = picard_map(
                    x_bar,
                    w_block,
                    spec,
                    target=counting,
                    key=key,
                    workers=workers,
                    pool=pool,
                    flags_prev=flags_prev,
                    lp_head=lp,
                )
                applications += 1
                prefix = agreement_prefix(flags_prev, new_flags)
                if min(prefix + 1, K) >= K:
                    break
                x_bar = new_states
                flags_prev = new_flags
            record.J += applications
            for s in range(K):
                if new_flags[s]:
                    lp = prop_lps[s]
            usable = min(K, n_steps - L)
            committed = new_states[1 : usable + 1]
            accepted += int(np.sum(new_flags[:usable]))
            moments.add_batch(committed)
            if store_trajectory:
                states_out.append(committed.copy())
                flags_out.append(new_flags[:usable].copy())
            if L + usable >= n_steps:
                x_final = committed[n_steps - L - 1].copy()
            x = new_states[K]
            L += K
            record.commits.append(usable)
            record.rounds.append((record.J, usable, min(L, n_steps), counting.count - 1))
    finally:
        if pool is not None:
            pool.shutdown()

    record.L = min(L, n_steps)
    record.evals = counting.count - 1
    record.acceptance = accepted / n_steps
    record.mean = moments.mean()
    record.sd = moments.sd() if moments.count >= 2 else None
    if store_trajectory:
        record.trajectory = Trajectory(
            states=np.vstack(states_out)[: n_steps + 1],
            accept_flags=np.concatenate(flags_out)[:n_steps],
        )
    assert x_final is not None
    return x_final, record
