"""Stable-throughput regions for an energy-harvesting cooperative cognitive radio link.

Closed-form region predicates and boundaries for the two decoupled dominant
systems, their union, and the non-cooperative baseline, cross-validated by a
slotted Monte Carlo simulation of the five interacting queues.
"""

from .core import (
    ParamError,
    PolicyKind,
    PolicySpec,
    QueueState,
    RatePoint,
    SystemParams,
    bernoulli,
    derive_rng,
    derive_seed,
    validate_params,
)
from .regions import (
    AnalyticPoint,
    RegionBoundary,
    RegionLabel,
    UnstablePrimaryError,
    analytic_point,
    crossover_lambda_p,
    default_a_grid,
    default_lambda_p_grid,
    es_busy_probability,
    extract_boundary,
    idle_probability,
    noncoop_contains,
    pu_service_rate,
    region1_contains,
    region2_contains,
    relay_arrival_rate,
    union_contains,
)
from .simulate import (
    CensoredMeasurementWarning,
    MeasuredRates,
    SimConfig,
    SimOutcome,
    SimulationError,
    SlotEvents,
    StabilityVerdict,
    is_stable_point,
    measure_service_rates,
    replication_trace,
    run_replication,
    step_slot,
)
from .sweep import (
    ComparisonReport,
    CrossoverEstimate,
    ExperimentSpec,
    LabeledBoundary,
    Mode,
    SweepGrids,
    builtin_experiment,
    builtin_experiments,
    default_grids,
    run_experiment,
    simulated_boundary,
)

__version__ = "0.1.0"
