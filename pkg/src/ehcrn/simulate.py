"""Slotted Monte Carlo of the five interacting queues and its stability detector.

Timing model (late arrivals): within a slot the PU transmits first if it has
data and energy; the SU transmits only in slots the PU leaves idle (perfect
sensing); arrivals land at the end of the slot and cannot be served in the
slot they arrive. Every transmission attempt, dummy or real, consumes one
energy unit; reception costs nothing. Buffers are unbounded.

Every slot consumes exactly eight uniforms in a fixed order regardless of
policy or state, so runs that share a seed see identical arrival and channel
randomness slot by slot across policies (common random numbers). The bulk
kernel and step_slot call the same transition function; numba compiles it
when available and the identical Python function runs otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    ParamError,
    PolicyKind,
    PolicySpec,
    QueueState,
    RatePoint,
    SystemParams,
    derive_rng,
)
from .regions import AnalyticPoint

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


QUEUES = ("q_p", "q_s", "q_ps", "q_ep", "q_es")
DATA_QUEUES = ("q_p", "q_s", "q_ps")

# uniform-draw columns, one row per slot
U_ARR_P, U_ARR_S, U_ARR_EP, U_ARR_ES, U_CH_PD, U_CH_SS, U_COIN, U_CH_SU = range(8)

# kernel policy codes
_COOP, _DOM1, _DOM2, _NONCOOP = 0, 1, 2, 3
_POLICY_CODE = {
    PolicyKind.COOPERATIVE: _COOP,
    PolicyKind.DOMINANT_I: _DOM1,
    PolicyKind.DOMINANT_II: _DOM2,
    PolicyKind.NON_COOPERATIVE: _NONCOOP,
}

# SU transmission targets
TX_NONE, TX_OWN, TX_RELAY, TX_DUMMY_OWN, TX_DUMMY_RELAY = 0, 1, 2, 3, 4


def _slot_transition_py(
    q_p, q_s, q_ps, q_ep, q_es,
    u_arr_p, u_arr_s, u_arr_ep, u_arr_es, u_ch_pd, u_ch_ss, u_coin, u_ch_su,
    p_pd, p_ss, s_pd, s_sd, lam_p, lam_s, lam_ep, lam_es,
    a, policy, saturate,
):
    """Advance the five queues by one slot; returns new state plus events.

    Under saturate the PU data queue is treated as always nonempty: its
    arrivals are ignored and departures do not decrement it.
    """
    pu_has_data = saturate or q_p > 0
    pu_active = pu_has_data and q_ep > 0
    pu_delivered = False
    relay_handoff = False
    if pu_active:
        q_ep -= 1
        if u_ch_pd < p_pd:
            pu_delivered = True
            if not saturate:
                q_p -= 1
        elif u_ch_ss < p_ss and policy != _NONCOOP:
            # direct link failed but the SU decoded: the packet moves to the
            # relay queue and the PU drops its copy (ACK overhearing is clean)
            relay_handoff = True
            if not saturate:
                q_p -= 1
            q_ps += 1

    su_target = TX_NONE
    su_delivered = False
    if not pu_active and q_es > 0:
        if policy == _NONCOOP:
            if q_s > 0:
                su_target = TX_OWN
        elif policy == _COOP:
            if u_coin < a:
                if q_s > 0:
                    su_target = TX_OWN
                elif q_ps > 0:
                    su_target = TX_RELAY
            else:
                if q_ps > 0:
                    su_target = TX_RELAY
                elif q_s > 0:
                    su_target = TX_OWN
        elif policy == _DOM1:
            # the own queue never looks empty: dummies stand in for packets,
            # so the relay queue is served only when the coin picks it
            if u_coin < a:
                su_target = TX_OWN if q_s > 0 else TX_DUMMY_OWN
            elif q_ps > 0:
                su_target = TX_RELAY
            else:
                su_target = TX_OWN if q_s > 0 else TX_DUMMY_OWN
        else:  # _DOM2: the relay queue never looks empty
            if u_coin < a and q_s > 0:
                su_target = TX_OWN
            elif q_ps > 0:
                su_target = TX_RELAY
            else:
                su_target = TX_DUMMY_RELAY
        if su_target != TX_NONE:
            q_es -= 1  # dummies burn energy too; that is what pins the battery drain to the idle rate
            if su_target == TX_OWN and u_ch_su < s_sd:
                q_s -= 1
                su_delivered = True
            elif su_target == TX_RELAY and u_ch_su < s_pd:
                q_ps -= 1
                su_delivered = True

    arr_p = (not saturate) and u_arr_p < lam_p
    arr_s = u_arr_s < lam_s
    arr_ep = u_arr_ep < lam_ep
    arr_es = u_arr_es < lam_es
    if arr_p:
        q_p += 1
    if arr_s:
        q_s += 1
    if arr_ep:
        q_ep += 1
    if arr_es:
        q_es += 1
    return (
        q_p, q_s, q_ps, q_ep, q_es,
        pu_active, pu_delivered, relay_handoff, su_target, su_delivered,
        arr_p, arr_s, arr_ep, arr_es,
    )


if HAVE_NUMBA:
    _transition = njit(cache=True)(_slot_transition_py)
else:
    _transition = _slot_transition_py

# counter indices; counters[0] covers burn-in slots, counters[1] the rest
(
    C_DEP_P, C_DEP_S, C_DEP_PS,
    C_ADM_P, C_ADM_S, C_ADM_PS,
    C_HARV_EP, C_HARV_ES, C_SPEND_EP, C_SPEND_ES,
    C_PU_ACTIVE, C_SU_TX, C_SU_DUMMY,
    C_QP_BUSY, C_QS_BUSY, C_QPS_BUSY, C_EP_BUSY, C_ES_BUSY,
    C_SLOTS,
) = range(19)
N_COUNTERS = 19

_COUNTER_NAMES = (
    "dep_p", "dep_s", "dep_ps",
    "adm_p", "adm_s", "adm_ps",
    "harv_ep", "harv_es", "spend_ep", "spend_es",
    "pu_active", "su_tx", "su_dummy",
    "qp_busy", "qs_busy", "qps_busy", "ep_busy", "es_busy",
    "slots",
)


def _sim_chunk_py(
    state, u, t0, horizon, burn_in,
    p_pd, p_ss, s_pd, s_sd, lam_p, lam_s, lam_ep, lam_es,
    a, policy, saturate,
    counters, q_after_burn, q_quarter, trace,
):
    """Run len(u) consecutive slots starting at global slot t0.

    Queue lengths are sampled at slot start. state, counters and the sum
    arrays are updated in place so the caller can feed uniforms in chunks.
    """
    q_p = state[0]
    q_s = state[1]
    q_ps = state[2]
    q_ep = state[3]
    q_es = state[4]
    tracing = trace.shape[0] > 0
    for i in range(u.shape[0]):
        t = t0 + i
        phase = 1 if t >= burn_in else 0
        quarter = (4 * t) // horizon
        if tracing:
            trace[t, 0] = q_p
            trace[t, 1] = q_s
            trace[t, 2] = q_ps
            trace[t, 3] = q_ep
            trace[t, 4] = q_es
        counters[phase, C_SLOTS] += 1
        if saturate or q_p > 0:
            counters[phase, C_QP_BUSY] += 1
        if q_s > 0:
            counters[phase, C_QS_BUSY] += 1
        if q_ps > 0:
            counters[phase, C_QPS_BUSY] += 1
        if q_ep > 0:
            counters[phase, C_EP_BUSY] += 1
        if q_es > 0:
            counters[phase, C_ES_BUSY] += 1
        if phase == 1:
            q_after_burn[0] += q_p
            q_after_burn[1] += q_s
            q_after_burn[2] += q_ps
            q_after_burn[3] += q_ep
            q_after_burn[4] += q_es
        q_quarter[quarter, 0] += q_p
        q_quarter[quarter, 1] += q_s
        q_quarter[quarter, 2] += q_ps
        q_quarter[quarter, 3] += q_ep
        q_quarter[quarter, 4] += q_es
        (
            q_p, q_s, q_ps, q_ep, q_es,
            pu_active, pu_delivered, relay_handoff, su_target, su_delivered,
            arr_p, arr_s, arr_ep, arr_es,
        ) = _transition(
            q_p, q_s, q_ps, q_ep, q_es,
            u[i, 0], u[i, 1], u[i, 2], u[i, 3], u[i, 4], u[i, 5], u[i, 6], u[i, 7],
            p_pd, p_ss, s_pd, s_sd, lam_p, lam_s, lam_ep, lam_es,
            a, policy, saturate,
        )
        if pu_active:
            counters[phase, C_PU_ACTIVE] += 1
            counters[phase, C_SPEND_EP] += 1
        if pu_delivered or relay_handoff:
            counters[phase, C_DEP_P] += 1
        if relay_handoff:
            counters[phase, C_ADM_PS] += 1
        if su_target != TX_NONE:
            counters[phase, C_SPEND_ES] += 1
            if su_target == TX_OWN or su_target == TX_RELAY:
                counters[phase, C_SU_TX] += 1
            else:
                counters[phase, C_SU_DUMMY] += 1
        if su_delivered:
            if su_target == TX_OWN:
                counters[phase, C_DEP_S] += 1
            else:
                counters[phase, C_DEP_PS] += 1
        if arr_p:
            counters[phase, C_ADM_P] += 1
        if arr_s:
            counters[phase, C_ADM_S] += 1
        if arr_ep:
            counters[phase, C_HARV_EP] += 1
        if arr_es:
            counters[phase, C_HARV_ES] += 1
    state[0] = q_p
    state[1] = q_s
    state[2] = q_ps
    state[3] = q_ep
    state[4] = q_es


if HAVE_NUMBA:
    _sim_chunk = njit(cache=True)(_sim_chunk_py)
else:
    _sim_chunk = _sim_chunk_py

_CHUNK_SLOTS = 1 << 18  # ~16 MB of uniforms per chunk


class SimulationError(RuntimeError):
    """An internal bookkeeping invariant failed (conservation or causality)."""


@dataclass(frozen=True)
class SimConfig:
    """Replication layout and stability-detector thresholds."""

    horizon_slots: int = 200_000
    burn_in_slots: int = 20_000   # slots discarded before rate statistics
    replications: int = 5
    seed: int = 42
    saturate_pu: bool = False     # treat the PU data queue as always backlogged
    drift_epsilon: float = 0.01   # packets/slot of estimated growth that flags a queue unstable

    def __post_init__(self):
        if self.horizon_slots < 8:
            raise ParamError("horizon_slots must be at least 8")
        if not 0 <= self.burn_in_slots < self.horizon_slots:
            raise ParamError("burn_in_slots must lie in [0, horizon_slots)")
        if self.replications < 1:
            raise ParamError("replications must be positive")
        if self.drift_epsilon <= 0.0:
            raise ParamError("drift_epsilon must be positive")


@dataclass(frozen=True)
class SlotEvents:
    """What happened in one slot."""

    pu_active: bool          # PU transmitted (data and energy both present)
    pu_delivered: bool       # head packet reached the PU destination
    relay_handoff: bool      # head packet moved to the SU relay queue
    su_target: int           # TX_NONE / TX_OWN / TX_RELAY / TX_DUMMY_OWN / TX_DUMMY_RELAY
    su_delivered: bool
    pu_energy_spent: bool
    su_energy_spent: bool
    arrivals: tuple[bool, bool, bool, bool]  # (q_p, q_s, q_ep, q_es)


def step_slot(
    state: QueueState,
    params: SystemParams,
    rates: RatePoint,
    policy: PolicySpec,
    rng: np.random.Generator,
    saturate_pu: bool = False,
) -> tuple[QueueState, SlotEvents]:
    """Advance one slot and report what happened.

    Draws eight uniforms whether or not each is consulted, so two policies
    driven by identically seeded generators stay coupled slot by slot.
    """
    u = rng.random(8)
    (
        q_p, q_s, q_ps, q_ep, q_es,
        pu_active, pu_delivered, relay_handoff, su_target, su_delivered,
        arr_p, arr_s, arr_ep, arr_es,
    ) = _transition(
        state.q_p, state.q_s, state.q_ps, state.q_ep, state.q_es,
        u[0], u[1], u[2], u[3], u[4], u[5], u[6], u[7],
        params.p_pd_success, params.p_ss_success,
        params.s_pd_success, params.s_sd_success,
        rates.lambda_p, rates.lambda_s, params.lambda_ep, params.lambda_es,
        policy.access_prob_a, _POLICY_CODE[policy.kind], saturate_pu,
    )
    events = SlotEvents(
        pu_active=bool(pu_active),
        pu_delivered=bool(pu_delivered),
        relay_handoff=bool(relay_handoff),
        su_target=int(su_target),
        su_delivered=bool(su_delivered),
        pu_energy_spent=bool(pu_active),
        su_energy_spent=su_target != TX_NONE,
        arrivals=(bool(arr_p), bool(arr_s), bool(arr_ep), bool(arr_es)),
    )
    new_state = QueueState(int(q_p), int(q_s), int(q_ps), int(q_ep), int(q_es))
    return new_state, events


@dataclass(frozen=True)
class SimOutcome:
    """One replication's counters, averages, and per-queue stability calls."""

    departures: dict[str, int]    # full-run; energy queues count spent units
    admissions: dict[str, int]    # full-run; q_ps includes relay handoffs, batteries harvested units
    mean_queue: dict[str, float]  # time average over post-burn-in slots
    drift: dict[str, float]       # data queues: (last-quarter mean - second-quarter mean) / (horizon/4)
    joint_busy_pu: float          # fraction of counted slots with PU data and energy both present
    idle_fraction: float          # fraction of counted slots with no PU transmission
    es_busy_fraction: float       # fraction of counted slots with a nonempty SU battery
    stable: dict[str, bool]       # per data queue: drift <= epsilon
    stable_overall: bool
    counts_total: dict[str, int]
    counts_measured: dict[str, int]  # post-burn-in only
    slots_counted: int
    final_state: QueueState


def _counts_dict(row: np.ndarray) -> dict[str, int]:
    return {name: int(row[idx]) for idx, name in enumerate(_COUNTER_NAMES)}


def run_replication(
    config: SimConfig,
    params: SystemParams,
    rates: RatePoint,
    policy: PolicySpec,
    rep_index: int = 0,
    _trace: np.ndarray | None = None,
) -> SimOutcome:
    """Simulate one seeded replication from empty queues.

    The stream is derived from (config.seed, rep_index) only, so replications
    of different policies with the same seed are coupled sample paths.
    """
    rng = derive_rng(config.seed, rep_index)
    horizon = config.horizon_slots
    state = np.zeros(5, dtype=np.int64)
    counters = np.zeros((2, N_COUNTERS), dtype=np.int64)
    q_after_burn = np.zeros(5, dtype=np.int64)
    q_quarter = np.zeros((4, 5), dtype=np.int64)
    trace = _trace if _trace is not None else np.zeros((0, 5), dtype=np.int64)
    t0 = 0
    while t0 < horizon:
        n = min(_CHUNK_SLOTS, horizon - t0)
        u = rng.random((n, 8))
        _sim_chunk(
            state, u, t0, horizon, config.burn_in_slots,
            params.p_pd_success, params.p_ss_success,
            params.s_pd_success, params.s_sd_success,
            rates.lambda_p, rates.lambda_s, params.lambda_ep, params.lambda_es,
            policy.access_prob_a, _POLICY_CODE[policy.kind], config.saturate_pu,
            counters, q_after_burn, q_quarter, trace,
        )
        t0 += n

    total = counters[0] + counters[1]
    measured = counters[1]
    final_state = QueueState(*(int(v) for v in state))

    departures = {
        "q_p": int(total[C_DEP_P]),
        "q_s": int(total[C_DEP_S]),
        "q_ps": int(total[C_DEP_PS]),
        "q_ep": int(total[C_SPEND_EP]),
        "q_es": int(total[C_SPEND_ES]),
    }
    admissions = {
        "q_p": int(total[C_ADM_P]),
        "q_s": int(total[C_ADM_S]),
        "q_ps": int(total[C_ADM_PS]),
        "q_ep": int(total[C_HARV_EP]),
        "q_es": int(total[C_HARV_ES]),
    }
    # conservation: queues start empty, so backlog = admissions - departures;
    # the saturated PU queue is synthetic and exempt
    finals = (final_state.q_p, final_state.q_s, final_state.q_ps,
              final_state.q_ep, final_state.q_es)
    for idx, name in enumerate(QUEUES):
        if name == "q_p" and config.saturate_pu:
            continue
        if admissions[name] - departures[name] != finals[idx]:
            raise SimulationError(
                f"conservation violated for {name}: "
                f"{admissions[name]} in - {departures[name]} out != {finals[idx]} left"
            )

    slots_counted = int(measured[C_SLOTS])
    mean_queue = {
        name: (q_after_burn[idx] / slots_counted if slots_counted else 0.0)
        for idx, name in enumerate(QUEUES)
    }
    quarter_len = (horizon // 2 - horizon // 4, horizon - (3 * horizon) // 4)
    drift = {}
    for idx, name in enumerate(DATA_QUEUES):
        mean_q2 = q_quarter[1, idx] / quarter_len[0]
        mean_q4 = q_quarter[3, idx] / quarter_len[1]
        drift[name] = (mean_q4 - mean_q2) / (horizon / 4.0)
    stable = {name: drift[name] <= config.drift_epsilon for name in DATA_QUEUES}

    return SimOutcome(
        departures=departures,
        admissions=admissions,
        mean_queue=mean_queue,
        drift=drift,
        joint_busy_pu=measured[C_PU_ACTIVE] / slots_counted if slots_counted else 0.0,
        idle_fraction=1.0 - measured[C_PU_ACTIVE] / slots_counted if slots_counted else 1.0,
        es_busy_fraction=measured[C_ES_BUSY] / slots_counted if slots_counted else 0.0,
        stable=stable,
        stable_overall=all(stable.values()),
        counts_total=_counts_dict(total),
        counts_measured=_counts_dict(measured),
        slots_counted=slots_counted,
        final_state=final_state,
    )


def replication_trace(
    config: SimConfig,
    params: SystemParams,
    rates: RatePoint,
    policy: PolicySpec,
    rep_index: int = 0,
) -> tuple[SimOutcome, np.ndarray]:
    """run_replication plus the (horizon, 5) queue-length sample path.

    Traces of different policies at the same (seed, rep_index) share every
    arrival and channel draw, which is what sample-path dominance checks need.
    """
    trace = np.zeros((config.horizon_slots, 5), dtype=np.int64)
    outcome = run_replication(config, params, rates, policy, rep_index, _trace=trace)
    return outcome, trace


def _median(values) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    return ordered[mid] if n % 2 else 0.5 * (ordered[mid - 1] + ordered[mid])


@dataclass(frozen=True)
class StabilityVerdict:
    """Majority stability vote across replications."""

    stable: bool
    queue_stable: dict[str, bool]
    unanimous: bool                      # every replication reached the same overall verdict
    drifts: dict[str, tuple[float, ...]]  # per data queue, one drift per replication
    mean_queues: dict[str, tuple[float, ...]]  # per data queue, post-burn-in time averages
    replications: int

    def drift_spread(self, queue: str) -> tuple[float, float]:
        values = self.drifts[queue]
        return (min(values), max(values))

    def median_drift(self, queue: str) -> float:
        return _median(self.drifts[queue])

    def median_mean_queue(self, queue: str) -> float:
        return _median(self.mean_queues[queue])


def _vote(outcomes: list[SimOutcome], epsilon: float) -> StabilityVerdict:
    queue_stable = {}
    for name in DATA_QUEUES:
        votes = [o.drift[name] <= epsilon for o in outcomes]
        queue_stable[name] = sum(votes) > len(votes) / 2
    rep_ok = [all(o.drift[name] <= epsilon for name in DATA_QUEUES) for o in outcomes]
    return StabilityVerdict(
        stable=all(queue_stable.values()),
        queue_stable=queue_stable,
        unanimous=all(rep_ok) or not any(rep_ok),
        drifts={name: tuple(o.drift[name] for o in outcomes) for name in DATA_QUEUES},
        mean_queues={
            name: tuple(o.mean_queue[name] for o in outcomes) for name in DATA_QUEUES
        },
        replications=len(outcomes),
    )


def is_stable_point(
    config: SimConfig,
    params: SystemParams,
    rates: RatePoint,
    policy: PolicySpec,
) -> StabilityVerdict:
    """Majority vote over seeded replications; needs at least 3 of them."""
    if config.replications < 3:
        raise ParamError("is_stable_point needs at least 3 replications")
    outcomes = [
        run_replication(config, params, rates, policy, rep_index=r)
        for r in range(config.replications)
    ]
    return _vote(outcomes, config.drift_epsilon)


class CensoredMeasurementWarning(UserWarning):
    """Rates were measured at a point the detector judged unstable."""


@dataclass(frozen=True)
class MeasuredRates:
    """Empirical counterparts of the closed-form rates, pooled over replications."""

    point: AnalyticPoint
    joint_busy_pu: float
    independence_gap: float  # |measured joint busy - lambda_ep * lambda_p / empirical mu_p|
    censored: bool           # true when the stability vote failed


def measure_service_rates(
    config: SimConfig,
    params: SystemParams,
    rates: RatePoint,
    policy: PolicySpec,
) -> MeasuredRates:
    """Measure service/arrival rates and occupancy fractions empirically.

    mu_p is departures per slot with a nonempty PU data queue (all slots
    under saturation); mu_s and mu_ps divide by the matching queue-busy
    slot counts. Warns and flags the result censored when the point is
    unstable, since busy-slot denominators are then biased.
    """
    outcomes = [
        run_replication(config, params, rates, policy, rep_index=r)
        for r in range(config.replications)
    ]
    verdict = _vote(outcomes, config.drift_epsilon)
    pooled = {
        name: sum(o.counts_measured[name] for o in outcomes)
        for name in _COUNTER_NAMES
    }
    slots = pooled["slots"]

    def ratio(num, den):
        return num / den if den else 0.0

    mu_p = ratio(pooled["dep_p"], pooled["qp_busy"])
    idle = 1.0 - ratio(pooled["pu_active"], slots)
    lambda_ps = ratio(pooled["adm_ps"], slots)
    es_busy = ratio(pooled["es_busy"], slots)
    mu_s = ratio(pooled["dep_s"], pooled["qs_busy"])
    mu_ps = ratio(pooled["dep_ps"], pooled["qps_busy"])
    joint = ratio(pooled["pu_active"], slots)
    # product-form prediction of the joint busy fraction:
    # lambda_ep * lambda_p / mu_p with mu_p built from the measured
    # per-transmission success rate (departures per PU-active slot)
    success_per_tx = ratio(pooled["dep_p"], pooled["pu_active"])
    eq_mu_p = success_per_tx * params.lambda_ep
    predicted_joint = (
        params.lambda_ep * rates.lambda_p / eq_mu_p if eq_mu_p > 0 else 0.0
    )
    if not verdict.stable:
        warnings.warn(
            f"measuring service rates at an unstable point {rates}; results are censored",
            CensoredMeasurementWarning,
            stacklevel=2,
        )
    return MeasuredRates(
        point=AnalyticPoint(mu_p, lambda_ps, idle, es_busy, mu_s, mu_ps),
        joint_busy_pu=joint,
        independence_gap=abs(joint - predicted_joint),
        censored=not verdict.stable,
    )


def warmup_kernel() -> None:
    """Force JIT compilation so forked workers inherit compiled code."""
    cfg = SimConfig(horizon_slots=16, burn_in_slots=0, replications=1, seed=0)
    run_replication(
        cfg,
        SystemParams(0.5, 0.5, 0.5, 0.5, 0.5, 0.5),
        RatePoint(0.1, 0.1),
        PolicySpec(PolicyKind.COOPERATIVE, 0.5),
    )
