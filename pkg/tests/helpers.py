"""Shared fixtures-by-hand: baseline parameters, independent oracles, samplers.

Oracles here are deliberately written from scratch (own formulas, own
bisection) so the tests check the package against an independent route,
not against itself.
"""

from __future__ import annotations

import numpy as np

from ehcrn import RatePoint, SystemParams, default_a_grid, union_contains

BASELINE_CHANNELS = (0.3, 0.4, 0.7, 0.7)


def baseline(lambda_ep=0.6, lambda_es=0.6) -> SystemParams:
    return SystemParams(*BASELINE_CHANNELS, lambda_ep, lambda_es)


def random_params(rng: np.random.Generator) -> SystemParams:
    return SystemParams(*(float(v) for v in rng.uniform(0.0, 1.0, 6)))


def bisect_max_lambda_s(predicate, lambda_p: float, tol: float = 1e-6) -> float:
    """Independent bisection for the largest lambda_s the predicate accepts."""
    if not predicate(RatePoint(lambda_p, 0.0)) and not predicate(RatePoint(lambda_p, tol)):
        return 0.0
    lo, hi = 0.0, 1.0
    if predicate(RatePoint(lambda_p, 1.0)):
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(RatePoint(lambda_p, mid)):
            lo = mid
        else:
            hi = mid
    return lo


def union_predicate(params: SystemParams):
    grid = default_a_grid()
    return lambda pt: union_contains(params, pt, grid)


def union_bound_formula(p: SystemParams, lambda_p: float) -> float:
    """Closed-form union boundary written out independently of the package."""
    mu_p = (p.p_pd_success + (1.0 - p.p_pd_success) * p.p_ss_success) * p.lambda_ep
    if not lambda_p < mu_p:
        return 0.0
    idle = 1.0 - p.lambda_ep * lambda_p / mu_p
    if idle <= 0.0:
        return 0.0
    cap = min(1.0, p.lambda_es / idle) * idle
    relay_rate = (1.0 - p.p_pd_success) * p.p_ss_success * p.lambda_ep * lambda_p / mu_p
    relay_cap = p.s_pd_success * cap
    if relay_cap <= 0.0 or relay_rate >= relay_cap:
        return 0.0
    return p.s_sd_success * cap * (1.0 - relay_rate / relay_cap)


def noncoop_bound_formula(p: SystemParams, lambda_p: float) -> float:
    mu_p = p.p_pd_success * p.lambda_ep
    if not lambda_p < mu_p:
        return 0.0
    idle = 1.0 - p.lambda_ep * lambda_p / mu_p
    if idle <= 0.0:
        return 0.0
    return p.s_sd_success * min(1.0, p.lambda_es / idle) * idle
