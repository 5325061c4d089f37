"""Acceptance criteria, one test per criterion, one printed verdict line each.

Criterion 6 simulates two full figures at default detector settings and
dominates the suite's runtime; grid points run in parallel across processes.
"""

import os
import time
from dataclasses import replace

import numpy as np

import test_region_properties as region_props
import test_simulate as sim_tests
from ehcrn import (
    Mode,
    PolicyKind,
    PolicySpec,
    RatePoint,
    SimConfig,
    builtin_experiment,
    crossover_lambda_p,
    default_a_grid,
    is_stable_point,
    measure_service_rates,
    pu_service_rate,
    replication_trace,
    run_experiment,
    union_contains,
)
from helpers import baseline, bisect_max_lambda_s, random_params

WORKERS = os.cpu_count() or 1


def _verdict(num: int, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"criterion {num}: {detail}"


def test_criterion_1_pu_service_rate_reproduction():
    value = pu_service_rate(baseline(lambda_ep=0.6))
    _verdict(1, value == 0.348, f"pu_service_rate(baseline, 0.6) = {value} (rounded report: 0.34)")


def test_criterion_2_crossover_reproduction():
    _, at = crossover_lambda_p(baseline())
    hi, lo = at(0.8), at(0.6)
    ok = (
        abs(hi - 0.0757) < 1e-4 and abs(lo - 0.1513) < 1e-4
        and abs(hi - 0.075) < 0.005 and abs(lo - 0.15) < 0.005
    )
    _verdict(2, ok, f"crossover(0.8) = {hi:.6f} vs 0.075, crossover(0.6) = {lo:.6f} vs 0.15")


def test_criterion_3_fig5_coincidence():
    spec = builtin_experiment("fig5")
    report = run_experiment(spec)
    curves = {lb.curve: lb.boundary for lb in report.boundaries}
    low, high = curves["union_es0.5"], curves["union_es1"]
    tol = spec.grids.bisect_tol
    agree_beyond = all(
        abs(a - b) < 2 * tol
        for lp, a, b in zip(low.lambda_p_grid, low.lambda_s_max, high.lambda_s_max)
        if lp >= 0.29
    )
    differ_below = all(
        abs(a - b) >= 2 * tol
        for lp, a, b in zip(low.lambda_p_grid, low.lambda_s_max, high.lambda_s_max)
        if lp < 0.29
    )
    intercept = low.lambda_s_max[0]
    ok = agree_beyond and differ_below and abs(intercept - 0.35) <= tol
    _verdict(
        3, ok,
        f"boundaries coincide for lambda_p >= 0.29: {agree_beyond}, "
        f"differ below: {differ_below}, su intercept {intercept:.6f} vs 0.35",
    )


def test_criterion_4_fig6_pu_cutoff():
    spec = builtin_experiment("fig6")
    report = run_experiment(spec)
    boundary = report.boundaries[0].boundary
    first_zero = min(
        lp for lp, v in zip(boundary.lambda_p_grid, boundary.lambda_s_max) if v == 0.0
    )
    step = boundary.lambda_p_grid[1] - boundary.lambda_p_grid[0]
    ok = abs(first_zero - 0.348) <= step + 1e-12
    _verdict(4, ok, f"union boundary reaches 0 at lambda_p = {first_zero:.3f} (0.348 +/- {step})")


def test_criterion_5_simulator_oracle_for_pu_rate():
    cfg = SimConfig(horizon_slots=1_000_000, burn_in_slots=20_000, replications=1,
                    seed=42, saturate_pu=True)
    start = time.perf_counter()
    measured = measure_service_rates(cfg, baseline(), RatePoint(0.0, 0.0),
                                     PolicySpec(PolicyKind.COOPERATIVE, 0.5))
    elapsed = time.perf_counter() - start
    ok = abs(measured.point.mu_p - 0.348) < 0.005 and elapsed < 10.0
    _verdict(
        5, ok,
        f"saturated 1e6-slot mu_p = {measured.point.mu_p:.5f} "
        f"(|diff| = {abs(measured.point.mu_p - 0.348):.5f} < 0.005) in {elapsed:.2f}s",
    )


def test_criterion_6_simulated_vs_analytic_boundaries():
    details = []
    ok = True
    start = time.perf_counter()
    for name in ("fig4", "fig9"):
        spec = replace(builtin_experiment(name), mode=Mode.COMPARE)
        report = run_experiment(spec, workers=WORKERS)
        ok = ok and report.max_gap is not None and report.max_gap <= 0.03
        details.append(f"{name} max_gap = {report.max_gap:.4f}")
    elapsed = time.perf_counter() - start
    _verdict(6, ok, ", ".join(details) + f" (tolerance 0.03, {elapsed:.0f}s, {WORKERS} workers)")


def test_criterion_7_loynes_verdicts_on_random_points():
    params = baseline()
    a_grid = default_a_grid()
    policy = PolicySpec(PolicyKind.COOPERATIVE, 0.5)
    config = SimConfig()
    pred = lambda pt: union_contains(params, pt, a_grid)
    rng = np.random.default_rng(2025)

    interior = []
    while len(interior) < 50:
        lp = float(rng.uniform(0.0, 0.297))
        bound = bisect_max_lambda_s(pred, lp, tol=1e-4)
        ceiling = bound - 0.0505
        if ceiling <= 0.0:
            continue
        interior.append(RatePoint(lp, float(rng.uniform(0.0, ceiling))))
    exterior = []
    while len(exterior) < 25:
        lp = float(rng.uniform(0.0, 0.29))
        bound = bisect_max_lambda_s(pred, lp, tol=1e-4)
        exterior.append(RatePoint(lp, min(1.0, bound + 0.0505 + float(rng.uniform(0.0, 0.2)))))
    while len(exterior) < 50:
        exterior.append(RatePoint(float(rng.uniform(0.3985, 0.6)), float(rng.uniform(0.0, 0.3))))

    wrong_interior = [
        pt for pt in interior if not is_stable_point(config, params, pt, policy).stable
    ]
    wrong_exterior = [
        pt for pt in exterior if is_stable_point(config, params, pt, policy).stable
    ]
    ok = not wrong_interior and not wrong_exterior
    _verdict(
        7, ok,
        f"50 interior points stable ({len(wrong_interior)} misses), "
        f"50 exterior points unstable ({len(wrong_exterior)} misses), margin 0.05",
    )


def test_criterion_8_invariant_suites():
    # analytic invariants at their stated sample sizes
    region_props.test_downward_closure()
    region_props.test_membership_monotone_in_lambda_es()
    region_props.test_dominant_regions_subsets_of_union()
    region_props.test_crossover_independent_of_lambda_ep()
    region_props.test_region1_lambda_s_bound_invariant_in_a()
    # conservation and per-slot energy causality
    sim_tests.test_conservation_holds_per_queue()
    sim_tests.test_energy_causality_and_single_transmission_per_slot()
    # dominance coupling: 10 random parameter sets, 1e5-slot coupled runs
    rng = np.random.default_rng(88)
    coupled_ok = True
    for i in range(10):
        params = random_params(rng)
        rates = RatePoint(float(rng.uniform()), float(rng.uniform()))
        a = float(rng.uniform())
        cfg = SimConfig(horizon_slots=100_000, burn_in_slots=0, replications=1, seed=3000 + i)
        _, coop_tr = replication_trace(cfg, params, rates, PolicySpec(PolicyKind.COOPERATIVE, a))
        _, dom1_tr = replication_trace(cfg, params, rates, PolicySpec(PolicyKind.DOMINANT_I, a))
        _, dom2_tr = replication_trace(cfg, params, rates, PolicySpec(PolicyKind.DOMINANT_II, a))
        coupled_ok = coupled_ok and bool(
            np.all(dom1_tr[:, 2] >= coop_tr[:, 2]) and np.all(dom2_tr[:, 1] >= coop_tr[:, 1])
        )
    _verdict(
        8, coupled_ok,
        "downward closure, lambda_es monotonicity, dominant subsets, crossover "
        "lambda_ep-independence, own-bound a-invariance, conservation, energy "
        "causality, and 10x1e5-slot dominance coupling all hold",
    )
