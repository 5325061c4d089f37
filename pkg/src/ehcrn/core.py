"""Shared domain types and the seeded random primitives used everywhere else.

All types are immutable value objects; the only stateful object in the
package is a random generator, and every consumer derives its own private
stream from a (seed, key...) tuple, so work can be farmed out to processes
in any order without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class ParamError(ValueError):
    """A model parameter lies outside its legal range."""


@dataclass(frozen=True)
class SystemParams:
    """Per-slot channel success probabilities and battery harvesting rates.

    Channels are Bernoulli per slot: a transmission on link j->k succeeds
    with the stored probability, independently across slots. Outage
    probabilities are never stored; use 1 - success where needed.
    """

    p_pd_success: float  # PU source -> PU destination success prob per slot
    p_ss_success: float  # PU source -> SU success prob per slot
    s_pd_success: float  # SU source -> PU destination success prob per slot
    s_sd_success: float  # SU source -> SU destination success prob per slot
    lambda_ep: float     # PU battery: mean energy units harvested per slot
    lambda_es: float     # SU battery: mean energy units harvested per slot


_PARAM_FIELDS = (
    "p_pd_success",
    "p_ss_success",
    "s_pd_success",
    "s_sd_success",
    "lambda_ep",
    "lambda_es",
)


def validate_params(params: SystemParams) -> SystemParams:
    """Return params unchanged if every field lies in [0, 1], else raise.

    The error message names the offending field.
    """
    for name in _PARAM_FIELDS:
        value = getattr(params, name)
        if not 0.0 <= value <= 1.0:
            raise ParamError(f"{name} must lie in [0, 1], got {value!r}")
    return params


@dataclass(frozen=True)
class RatePoint:
    """A candidate (lambda_p, lambda_s) pair of data arrival rates, packets/slot."""

    lambda_p: float
    lambda_s: float

    def __post_init__(self):
        if not 0.0 <= self.lambda_p <= 1.0:
            raise ParamError(f"lambda_p must lie in [0, 1], got {self.lambda_p!r}")
        if not 0.0 <= self.lambda_s <= 1.0:
            raise ParamError(f"lambda_s must lie in [0, 1], got {self.lambda_s!r}")


class PolicyKind(Enum):
    """Which transmission discipline the SU runs in sensed-idle slots."""

    COOPERATIVE = "coop"         # randomized: own queue w.p. a, relay w.p. 1-a, work conserving
    DOMINANT_I = "dominant1"     # coop, but an empty own queue emits dummy packets
    DOMINANT_II = "dominant2"    # coop, but an empty relay queue emits dummy packets
    NON_COOPERATIVE = "noncoop"  # own queue only; the PU never hands packets off


@dataclass(frozen=True)
class PolicySpec:
    """A transmission policy plus its access probability.

    access_prob_a is the probability the SU serves its own queue in an
    exploitable slot; it is meaningless for the non-cooperative policy.
    """

    kind: PolicyKind
    access_prob_a: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.access_prob_a <= 1.0:
            raise ParamError(
                f"access_prob_a must lie in [0, 1], got {self.access_prob_a!r}"
            )


@dataclass(frozen=True)
class QueueState:
    """Instantaneous backlog of the five queues (packets / energy units)."""

    q_p: int = 0    # PU data queue
    q_s: int = 0    # SU own data queue
    q_ps: int = 0   # SU relay queue (PU packets awaiting forwarding)
    q_ep: int = 0   # PU battery
    q_es: int = 0   # SU battery

    def __post_init__(self):
        for name in ("q_p", "q_s", "q_ps", "q_ep", "q_es"):
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be nonnegative")


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent random stream for this (seed, key...) tuple.

    Philox is counter based, so streams derived from distinct keys never
    overlap and may be consumed in any order across concurrent workers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed for this (seed, key...) tuple."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def bernoulli(prob: float, rng: np.random.Generator) -> bool:
    """One Bernoulli draw from the given stream.

    prob = 0 never fires and prob = 1 always fires (rng.random() < 1.0
    holds for every value the generator can produce).
    """
    if not 0.0 <= prob <= 1.0:
        raise ParamError(f"prob must lie in [0, 1], got {prob!r}")
    return bool(rng.random() < prob)
