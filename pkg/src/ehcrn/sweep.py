"""Grid sweeps: analytic boundaries, simulated boundaries, and their comparison.

Each figure-style experiment is a set of curves (policy x parameter variant).
Simulated boundaries bisect the stability detector over lambda_s at every
grid lambda_p; every probe draws its own seed from (master seed, curve,
grid index, probe index), so reports are identical no matter how grid
points are scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

from .core import (
    ParamError,
    PolicyKind,
    PolicySpec,
    RatePoint,
    SystemParams,
    derive_seed,
    validate_params,
)
from .regions import (
    RegionBoundary,
    RegionLabel,
    crossover_lambda_p,
    default_a_grid,
    default_lambda_p_grid,
    extract_boundary,
    noncoop_contains,
    region1_contains,
    region2_contains,
    union_contains,
)
from .simulate import (
    SimConfig,
    StabilityVerdict,
    is_stable_point,
    warmup_kernel,
)


class Mode(Enum):
    ANALYTIC = "analytic"
    SIMULATE = "simulate"
    COMPARE = "compare"


@dataclass(frozen=True)
class SweepGrids:
    lambda_p_grid: tuple[float, ...]
    a_grid: tuple[float, ...]       # access probabilities unioned over for the cooperative region
    bisect_tol: float = 1e-4

    def __post_init__(self):
        if not self.lambda_p_grid or not self.a_grid:
            raise ParamError("grids must be nonempty")
        for v in self.lambda_p_grid + self.a_grid:
            if not 0.0 <= v <= 1.0:
                raise ParamError("grid values must lie in [0, 1]")
        if self.bisect_tol <= 0.0:
            raise ParamError("bisect_tol must be positive")


def default_grids() -> SweepGrids:
    return SweepGrids(default_lambda_p_grid(), default_a_grid(), 1e-4)


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible scenario: parameters, curves to draw, and how."""

    name: str
    params: SystemParams
    policies: tuple[PolicySpec, ...]
    mode: Mode
    grids: SweepGrids
    sim: SimConfig
    # optional (tag, params) overlays; figures that compare two harvesting
    # settings put both here and leave `params` as the first entry
    variants: tuple[tuple[str, SystemParams], ...] = ()


@dataclass(frozen=True)
class LabeledBoundary:
    """A boundary plus where it came from."""

    curve: str                   # e.g. "union", "r1_a0.1", "union_es0.5"
    source: str                  # "analytic" | "simulated"
    boundary: RegionBoundary
    uncertain: tuple[bool, ...]  # per grid point; always False for analytic


@dataclass(frozen=True)
class CrossoverEstimate:
    """Where the cooperative and non-cooperative boundaries meet."""

    predicted: float        # closed form, from the channel constant
    measured: float | None  # interpolated grid crossing, None when the curves never cross
    constant: float         # the channel-only constant in the closed form


@dataclass(frozen=True)
class ComparisonReport:
    experiment: str
    seed: int
    boundaries: tuple[LabeledBoundary, ...]
    max_gap: float | None            # largest |analytic - simulated| over non-uncertain points
    crossover: CrossoverEstimate | None


def _policy_curve(policy: PolicySpec, a_grid: tuple[float, ...]):
    """(region predicate, label, base curve name) for one policy."""
    if policy.kind is PolicyKind.COOPERATIVE:
        return (
            lambda p, pt: union_contains(p, pt, a_grid),
            RegionLabel.UNION,
            "union",
        )
    if policy.kind is PolicyKind.DOMINANT_I:
        a = policy.access_prob_a
        return (
            lambda p, pt: region1_contains(p, a, pt),
            RegionLabel.R1,
            f"r1_a{a:g}",
        )
    if policy.kind is PolicyKind.DOMINANT_II:
        a = policy.access_prob_a
        return (
            lambda p, pt: region2_contains(p, a, pt),
            RegionLabel.R2,
            f"r2_a{a:g}",
        )
    return (noncoop_contains, RegionLabel.NONCOOP, "noncoop")


def _borderline(verdict: StabilityVerdict, sim: SimConfig) -> bool:
    """True when the detector cannot really resolve this point.

    Three signatures of an unresolvable point: the replications disagreed; a
    queue was called stable with measurable drift anyway; or a queue was
    called stable while some replication's time-average backlog sits at the
    diffusive scale sqrt(horizon) that an exactly critical queue builds up
    (its battery reserve hides the drift within any finite window, and the
    excursions are heavy-tailed, so one path out of several showing the
    scale is already the signature). Unstable calls whose drift barely
    clears the threshold are gray too.
    """
    if not verdict.unanimous:
        return True
    epsilon = sim.drift_epsilon
    diffusive_backlog = 0.1 * sim.horizon_slots ** 0.5
    for queue in verdict.drifts:
        drift = verdict.median_drift(queue)
        if verdict.queue_stable[queue]:
            if drift > epsilon / 8.0:
                return True
            if max(verdict.mean_queues[queue]) > diffusive_backlog:
                return True
        elif drift < 4.0 * epsilon:
            return True
    return False


_BISECT_ITERATIONS = 6  # lambda_s resolution 2**-6 ~ 0.016


def _simulated_point(
    sim: SimConfig,
    params: SystemParams,
    policy: PolicySpec,
    lambda_p: float,
    seed_key: tuple[int, int, int],
) -> tuple[float, bool]:
    """Largest empirically stable lambda_s at one grid point, plus an
    uncertainty flag for results the detector cannot be trusted on."""

    def probe(probe_index: int, lambda_s: float) -> StabilityVerdict:
        cfg = replace(sim, seed=derive_seed(sim.seed, *seed_key, probe_index))
        return is_stable_point(cfg, params, RatePoint(lambda_p, lambda_s), policy)

    base = probe(0, 0.0)
    uncertain = _borderline(base, sim)
    if not base.stable:
        # cannot bracket: even an empty SU load is unstable here
        return 0.0, True
    lo, hi = 0.0, 1.0
    lo_verdict = base
    for k in range(1, _BISECT_ITERATIONS + 1):
        mid = 0.5 * (lo + hi)
        verdict = probe(k, mid)
        if verdict.stable:
            lo, lo_verdict = mid, verdict
        else:
            hi = mid
    if not lo_verdict.unanimous:
        uncertain = True
    return lo, uncertain


def _simulated_point_task(args):
    sim, params, policy, grid_index, lambda_p, curve_key = args
    value, uncertain = _simulated_point(
        sim, params, policy, lambda_p, (*curve_key, grid_index)
    )
    return grid_index, value, uncertain


def simulated_boundary(
    sim: SimConfig,
    params: SystemParams,
    policy: PolicySpec,
    lambda_p_grid: tuple[float, ...],
    label: RegionLabel,
    curve_key: tuple[int, int] = (0, 0),
    workers: int | None = None,
) -> tuple[RegionBoundary, tuple[bool, ...]]:
    """Bisect the detector over lambda_s at every grid point.

    Grid points are independent tasks; results are keyed by grid index so
    the boundary is identical however they are scheduled.
    """
    tasks = [
        (sim, params, policy, j, lp, curve_key)
        for j, lp in enumerate(lambda_p_grid)
    ]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        warmup_kernel()  # compile before forking so children inherit the JIT
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulated_point_task, tasks, chunksize=4))
    else:
        results = [_simulated_point_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    values = tuple(r[1] for r in results)
    uncertain = tuple(r[2] for r in results)
    return RegionBoundary(tuple(lambda_p_grid), values, label), uncertain


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> ComparisonReport:
    """Produce every curve of the experiment and compare sources where possible."""
    curves = spec.variants if spec.variants else (("", spec.params),)
    boundaries: list[LabeledBoundary] = []
    for ci, (tag, params) in enumerate(curves):
        validate_params(params)
        for pi, policy in enumerate(spec.policies):
            region, label, base_name = _policy_curve(policy, spec.grids.a_grid)
            curve = f"{base_name}_{tag}" if tag else base_name
            if spec.mode in (Mode.ANALYTIC, Mode.COMPARE):
                boundary = extract_boundary(
                    params, region, spec.grids.lambda_p_grid,
                    spec.grids.bisect_tol, label,
                )
                boundaries.append(
                    LabeledBoundary(
                        curve, "analytic", boundary,
                        (False,) * len(spec.grids.lambda_p_grid),
                    )
                )
            if spec.mode in (Mode.SIMULATE, Mode.COMPARE):
                boundary, uncertain = simulated_boundary(
                    spec.sim, params, policy, spec.grids.lambda_p_grid,
                    label, curve_key=(ci, pi), workers=workers,
                )
                boundaries.append(
                    LabeledBoundary(curve, "simulated", boundary, uncertain)
                )
    return ComparisonReport(
        experiment=spec.name,
        seed=spec.sim.seed,
        boundaries=tuple(boundaries),
        max_gap=_max_gap(boundaries),
        crossover=_crossover(curves, boundaries),
    )


def _max_gap(boundaries: list[LabeledBoundary]) -> float | None:
    """Largest |analytic - simulated| over curves present in both sources,
    skipping points the simulation marked uncertain."""
    by_curve: dict[str, dict[str, LabeledBoundary]] = {}
    for lb in boundaries:
        by_curve.setdefault(lb.curve, {})[lb.source] = lb
    gaps = []
    for sources in by_curve.values():
        if "analytic" not in sources or "simulated" not in sources:
            continue
        ana = sources["analytic"].boundary.lambda_s_max
        sim = sources["simulated"].boundary.lambda_s_max
        unc = sources["simulated"].uncertain
        gaps.extend(
            abs(a - s) for a, s, u in zip(ana, sim, unc) if not u
        )
    return max(gaps) if gaps else None


def _crossover(
    curves: tuple[tuple[str, SystemParams], ...],
    boundaries: list[LabeledBoundary],
) -> CrossoverEstimate | None:
    """Crossing of the union and non-cooperative boundaries, when both exist.

    Prefers analytic boundaries; falls back to simulated ones. Uses the
    first variant that carries both curves.
    """
    by_key = {(lb.curve, lb.source): lb for lb in boundaries}
    for tag, params in curves:
        union_name = f"union_{tag}" if tag else "union"
        noncoop_name = f"noncoop_{tag}" if tag else "noncoop"
        for source in ("analytic", "simulated"):
            union = by_key.get((union_name, source))
            noncoop = by_key.get((noncoop_name, source))
            if union is None or noncoop is None:
                continue
            constant, predictor = crossover_lambda_p(params)
            measured = _first_crossing(
                union.boundary.lambda_p_grid,
                noncoop.boundary.lambda_s_max,
                union.boundary.lambda_s_max,
            )
            return CrossoverEstimate(
                predicted=predictor(params.lambda_es),
                measured=measured,
                constant=constant,
            )
    return None


def _first_crossing(grid, upper_values, lower_values) -> float | None:
    """First lambda_p where (upper - lower) changes sign, linearly interpolated."""
    diffs = [u - l for u, l in zip(upper_values, lower_values)]
    for i in range(1, len(diffs)):
        if diffs[i - 1] > 0.0 >= diffs[i]:
            span = diffs[i - 1] - diffs[i]
            if span <= 0.0:
                return grid[i]
            frac = diffs[i - 1] / span
            return grid[i - 1] + frac * (grid[i] - grid[i - 1])
    return None


BASELINE_CHANNELS = (0.3, 0.4, 0.7, 0.7)  # success probabilities shared by every built-in scenario


def _baseline(lambda_ep: float, lambda_es: float) -> SystemParams:
    return SystemParams(*BASELINE_CHANNELS, lambda_ep, lambda_es)


def builtin_experiments() -> tuple[ExperimentSpec, ...]:
    """The nine named figure scenarios.

    All use the baseline channels. The dominant-system access probabilities
    {0.1, 0.5, 0.9} and the fig8 harvesting pair (0.3, 0.3) are artifact
    defaults, not published values. Defaults run analytically; switch the
    mode to compare to add the simulated boundaries.
    """
    grids = default_grids()
    sim = SimConfig()
    coop = (PolicySpec(PolicyKind.COOPERATIVE, 0.5),)
    coop_vs_noncoop = (
        PolicySpec(PolicyKind.COOPERATIVE, 0.5),
        PolicySpec(PolicyKind.NON_COOPERATIVE),
    )
    dom_a = (0.1, 0.5, 0.9)
    return (
        ExperimentSpec(
            "fig2", _baseline(0.6, 0.6),
            tuple(PolicySpec(PolicyKind.DOMINANT_I, a) for a in dom_a),
            Mode.ANALYTIC, grids, sim,
        ),
        ExperimentSpec(
            "fig3", _baseline(0.6, 0.6),
            tuple(PolicySpec(PolicyKind.DOMINANT_II, a) for a in dom_a),
            Mode.ANALYTIC, grids, sim,
        ),
        ExperimentSpec("fig4", _baseline(0.6, 0.6), coop, Mode.ANALYTIC, grids, sim),
        ExperimentSpec(
            "fig5", _baseline(1.0, 0.5), coop, Mode.ANALYTIC, grids, sim,
            variants=(("es0.5", _baseline(1.0, 0.5)), ("es1", _baseline(1.0, 1.0))),
        ),
        ExperimentSpec("fig6", _baseline(0.6, 1.0), coop, Mode.ANALYTIC, grids, sim),
        ExperimentSpec(
            "fig7", _baseline(0.6, 0.6), coop, Mode.ANALYTIC, grids, sim,
            variants=(("limited", _baseline(0.6, 0.6)), ("unlimited", _baseline(1.0, 1.0))),
        ),
        ExperimentSpec(
            "fig8", _baseline(0.3, 0.3), coop, Mode.ANALYTIC, grids, sim,
            variants=(("limited", _baseline(0.3, 0.3)), ("unlimited", _baseline(1.0, 1.0))),
        ),
        ExperimentSpec("fig9", _baseline(0.5, 0.8), coop_vs_noncoop, Mode.ANALYTIC, grids, sim),
        ExperimentSpec("fig10", _baseline(0.5, 0.6), coop_vs_noncoop, Mode.ANALYTIC, grids, sim),
    )


def builtin_experiment(name: str) -> ExperimentSpec:
    for spec in builtin_experiments():
        if spec.name == name:
            return spec
    valid = ", ".join(s.name for s in builtin_experiments())
    raise KeyError(f"unknown experiment {name!r}; valid names: {valid}")
