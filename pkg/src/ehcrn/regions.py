"""Closed-form service rates, stability-region predicates, and boundary extraction.

Everything here is a pure function of value inputs. Region membership is
evaluated pointwise at a concrete (lambda_p, lambda_s) because the relay
conditions contain lambda_p on both sides once the battery occupancy is
clamped; solving them symbolically would need case analysis the pointwise
check avoids. All stability inequalities are strict, so boundaries
themselves are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Sequence

from .core import ParamError, PolicyKind, PolicySpec, RatePoint, SystemParams


class UnstablePrimaryError(ValueError):
    """A quantity was requested at a PU arrival rate the PU queue cannot carry."""


def pu_service_rate(params: SystemParams) -> float:
    """PU data-queue service rate, packets/slot.

    A head packet is served when it reaches the PU destination directly or,
    failing that, is decoded by the SU (which then owns delivery). Both
    need a stored energy unit; under a saturated PU the battery is busy
    with probability lambda_ep, giving the energy factor.
    """
    outage = 1.0 - params.p_pd_success
    return (params.p_pd_success + outage * params.p_ss_success) * params.lambda_ep


def _require_stable_pu(params: SystemParams, lambda_p: float) -> float:
    mu_p = pu_service_rate(params)
    if not lambda_p < mu_p:
        raise UnstablePrimaryError(
            f"lambda_p = {lambda_p!r} is not below the PU service rate {mu_p!r}"
        )
    return mu_p


def relay_arrival_rate(params: SystemParams, lambda_p: float) -> float:
    """Arrival rate into the SU relay queue, packets/slot.

    A PU packet enters the relay queue when the direct link fails, the
    PU->SU link succeeds, and the PU actually transmitted that slot.
    Requires lambda_p < pu_service_rate (the PU busy fraction is
    lambda_p / mu_p only for a stable PU queue).
    """
    mu_p = _require_stable_pu(params, lambda_p)
    outage = 1.0 - params.p_pd_success
    return outage * params.p_ss_success * params.lambda_ep * (lambda_p / mu_p)


def idle_probability(params: SystemParams, lambda_p: float) -> float:
    """Probability the PU leaves a slot idle: 1 - lambda_ep * (lambda_p / mu_p)."""
    mu_p = _require_stable_pu(params, lambda_p)
    return 1.0 - params.lambda_ep * (lambda_p / mu_p)


def es_busy_probability(params: SystemParams, lambda_p: float) -> float:
    """Probability the SU battery is nonempty, clamped to [0, 1].

    The battery drains at most once per idle slot, so its occupancy is
    lambda_es / idle; once harvesting outpaces the idle slots the battery
    never empties and the value saturates at 1. The clamp is mandatory:
    every region formula consumes this quantity through here.
    """
    idle = idle_probability(params, lambda_p)
    if idle <= 0.0:
        return 1.0 if params.lambda_es > 0.0 else 0.0
    return min(1.0, params.lambda_es / idle)


class _PointEnv(NamedTuple):
    """Shared per-point quantities for a PU-stable lambda_p."""

    mu_p: float
    idle: float
    busy: float        # Pr(SU battery nonempty), clamped
    capacity: float    # busy * idle: fraction of slots the SU can exploit
    relay_rate: float


def _point_env(params: SystemParams, lambda_p: float) -> _PointEnv | None:
    """None when lambda_p is not below the PU service rate."""
    mu_p = pu_service_rate(params)
    if not lambda_p < mu_p:
        return None
    idle = idle_probability(params, lambda_p)
    busy = es_busy_probability(params, lambda_p)
    return _PointEnv(mu_p, idle, busy, busy * idle, relay_arrival_rate(params, lambda_p))


def region1_contains(params: SystemParams, a: float, pt: RatePoint) -> bool:
    """Membership in the stability region of the relay-favoring dominant system.

    Here the SU pads an empty own queue with dummy transmissions, so the
    relay queue is served with probability (1 - a) in every exploitable
    slot. The resulting bound on lambda_s does not depend on a: raising a
    serves the own queue more often but leaves the relay queue nonempty
    more often, and the two effects cancel exactly.
    """
    env = _point_env(params, pt.lambda_p)
    if env is None:
        return False
    relay_service = params.s_pd_success * env.capacity * (1.0 - a)
    if env.relay_rate > 0.0:
        if not env.relay_rate < relay_service:
            return False
        # relay_rate < relay_service <= s_pd * capacity, so the denominator
        # is positive and the occupancy is below 1
        relay_occupancy = env.relay_rate / (params.s_pd_success * env.capacity)
    else:
        relay_occupancy = 0.0
    own_service = params.s_sd_success * env.capacity * (1.0 - relay_occupancy)
    return pt.lambda_s < own_service


def region2_contains(params: SystemParams, a: float, pt: RatePoint) -> bool:
    """Membership in the stability region of the own-queue-favoring dominant system.

    Here the SU pads an empty relay queue with dummies, so the own queue is
    served with probability a in every exploitable slot, and the relay
    bound shrinks with the own queue's occupancy. The maximum lambda_p
    admitted by the relay condition does not depend on a.
    """
    env = _point_env(params, pt.lambda_p)
    if env is None:
        return False
    own_service = params.s_sd_success * env.capacity * a
    if not pt.lambda_s < own_service:
        return False
    if env.relay_rate == 0.0:
        return True
    # lambda_s < own_service <= s_sd * capacity, so the denominator is positive
    own_load = pt.lambda_s / (params.s_sd_success * env.capacity) if pt.lambda_s > 0.0 else 0.0
    relay_service = params.s_pd_success * env.capacity * (1.0 - own_load)
    return env.relay_rate < relay_service


def union_contains(
    params: SystemParams, pt: RatePoint, a_grid: Sequence[float]
) -> bool:
    """True when either dominant-system region contains pt for some a in a_grid."""
    if len(a_grid) == 0:
        raise ParamError("a_grid must be nonempty")
    return any(
        region1_contains(params, a, pt) or region2_contains(params, a, pt)
        for a in a_grid
    )


def noncoop_contains(params: SystemParams, pt: RatePoint) -> bool:
    """Stability region of the baseline system without relaying.

    The PU retries failed packets itself (service rate p_pd * lambda_ep)
    and the SU serves only its own queue in sensed-idle slots.
    """
    mu_p = params.p_pd_success * params.lambda_ep
    if not pt.lambda_p < mu_p:
        return False
    idle = 1.0 - params.lambda_ep * (pt.lambda_p / mu_p)
    if idle <= 0.0:
        busy = 1.0 if params.lambda_es > 0.0 else 0.0
    else:
        busy = min(1.0, params.lambda_es / idle)
    return pt.lambda_s < params.s_sd_success * busy * idle


def crossover_lambda_p(
    params: SystemParams,
) -> tuple[float, Callable[[float], float]]:
    """Channel constant D and the map lambda_es -> crossover PU rate.

    The crossover is the PU arrival rate at which the cooperative and
    non-cooperative systems allow the same SU throughput; above it
    cooperation wins. D depends only on the channel probabilities, so the
    crossover is independent of lambda_ep.
    """
    if params.p_pd_success <= 0.0:
        raise ParamError("p_pd_success must be positive for the crossover constant")
    outage = 1.0 - params.p_pd_success
    combined = params.p_pd_success + outage * params.p_ss_success
    d = 1.0 / params.p_pd_success - (outage * params.p_ss_success) / (
        params.s_pd_success * combined
    )

    def crossover(lambda_es: float) -> float:
        return (1.0 - lambda_es) / d

    return d, crossover


class RegionLabel(Enum):
    R1 = "r1"
    R2 = "r2"
    UNION = "union"
    NONCOOP = "noncoop"


@dataclass(frozen=True)
class RegionBoundary:
    """Largest stable lambda_s per grid lambda_p (0 where none exists)."""

    lambda_p_grid: tuple[float, ...]
    lambda_s_max: tuple[float, ...]
    label: RegionLabel

    def __post_init__(self):
        if len(self.lambda_p_grid) != len(self.lambda_s_max):
            raise ParamError("grid and boundary values must have equal length")
        for left, right in zip(self.lambda_p_grid, self.lambda_p_grid[1:]):
            if not left < right:
                raise ParamError("lambda_p_grid must be strictly increasing")
        for value in self.lambda_s_max:
            if not 0.0 <= value <= 1.0:
                raise ParamError("lambda_s_max entries must lie in [0, 1]")


RegionPredicate = Callable[[SystemParams, RatePoint], bool]


def extract_boundary(
    params: SystemParams,
    region: RegionPredicate,
    lambda_p_grid: Sequence[float],
    tol: float = 1e-4,
    label: RegionLabel = RegionLabel.UNION,
) -> RegionBoundary:
    """Bisect the supremum of stable lambda_s at each grid lambda_p.

    The predicate must be downward closed in lambda_s at fixed lambda_p
    (all regions here are). A grid point where even lambda_s = tol is
    infeasible yields 0.
    """
    values = []
    for lp in lambda_p_grid:
        if not region(params, RatePoint(lp, tol)):
            values.append(0.0)
            continue
        if region(params, RatePoint(lp, 1.0)):
            values.append(1.0)
            continue
        lo, hi = tol, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if region(params, RatePoint(lp, mid)):
                lo = mid
            else:
                hi = mid
        values.append(lo)
    return RegionBoundary(tuple(float(lp) for lp in lambda_p_grid), tuple(values), label)


def default_lambda_p_grid(maximum: float = 0.6, step: float = 0.005) -> tuple[float, ...]:
    """Evenly spaced PU-rate grid; the default resolves every reported feature."""
    if step <= 0.0 or maximum <= 0.0:
        raise ParamError("grid maximum and step must be positive")
    count = round(maximum / step)
    return tuple(i * step for i in range(count + 1))


def default_a_grid(step: float = 0.05) -> tuple[float, ...]:
    """Access-probability grid {0, step, ..., 1} used for region unions."""
    if not 0.0 < step <= 1.0:
        raise ParamError("a_grid step must lie in (0, 1]")
    count = round(1.0 / step)
    return tuple(min(1.0, i * step) for i in range(count + 1))


@dataclass(frozen=True)
class AnalyticPoint:
    """Closed-form rate snapshot at one PU-stable operating point."""

    mu_p: float          # PU data-queue service rate
    lambda_ps: float     # relay-queue arrival rate
    idle_prob: float     # probability the PU leaves a slot idle
    es_busy_prob: float  # Pr(SU battery nonempty), clamped
    mu_s: float          # SU own-queue service rate under the selected policy
    mu_ps: float         # relay-queue service rate under the selected policy


def analytic_point(
    params: SystemParams, policy: PolicySpec, rates: RatePoint
) -> AnalyticPoint:
    """Evaluate the closed-form rates at rates.lambda_p for the given policy.

    Dominant policies report their own service rates; the randomized
    cooperative policy reports the a-independent bounds that delimit the
    union region. Raises UnstablePrimaryError when lambda_p is not below
    the applicable PU service rate.
    """
    if policy.kind is PolicyKind.NON_COOPERATIVE:
        mu_p = params.p_pd_success * params.lambda_ep
        if not rates.lambda_p < mu_p:
            raise UnstablePrimaryError(
                f"lambda_p = {rates.lambda_p!r} is not below the PU service rate {mu_p!r}"
            )
        idle = 1.0 - params.lambda_ep * (rates.lambda_p / mu_p)
        if idle <= 0.0:
            busy = 1.0 if params.lambda_es > 0.0 else 0.0
        else:
            busy = min(1.0, params.lambda_es / idle)
        return AnalyticPoint(mu_p, 0.0, idle, busy, params.s_sd_success * busy * idle, 0.0)

    env = _point_env(params, rates.lambda_p)
    if env is None:
        raise UnstablePrimaryError(
            f"lambda_p = {rates.lambda_p!r} is not below the PU service rate"
        )
    a = policy.access_prob_a
    relay_cap = params.s_pd_success * env.capacity
    own_cap = params.s_sd_success * env.capacity
    relay_occupancy = env.relay_rate / relay_cap if relay_cap > 0.0 else 0.0
    own_load = rates.lambda_s / own_cap if own_cap > 0.0 else 0.0
    if policy.kind is PolicyKind.DOMINANT_I:
        mu_ps = relay_cap * (1.0 - a)
        mu_s = max(0.0, own_cap * (1.0 - relay_occupancy))
    elif policy.kind is PolicyKind.DOMINANT_II:
        mu_s = own_cap * a
        mu_ps = max(0.0, relay_cap * (1.0 - own_load))
    else:  # cooperative: the union-delimiting bounds
        mu_s = max(0.0, own_cap * (1.0 - relay_occupancy))
        mu_ps = max(0.0, relay_cap * (1.0 - own_load))
    return AnalyticPoint(env.mu_p, env.relay_rate, env.idle, env.busy, mu_s, mu_ps)
