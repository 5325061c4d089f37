"""Command line entry point, flat-file config parsing, and CSV emission.

Config files are flat `key = value` lines with `#` comments. Unknown keys
are rejected rather than ignored, and the four channel success
probabilities have no defaults. Summaries go to stdout, diagnostics to
stderr; the exit code is 0 only on success.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .core import ParamError, PolicyKind, PolicySpec, SystemParams, validate_params
from .regions import (
    RegionBoundary,
    RegionLabel,
    UnstablePrimaryError,
    crossover_lambda_p,
    default_a_grid,
    default_lambda_p_grid,
    pu_service_rate,
)
from .simulate import SimConfig
from .sweep import (
    ComparisonReport,
    ExperimentSpec,
    LabeledBoundary,
    Mode,
    SweepGrids,
    builtin_experiment,
    builtin_experiments,
    run_experiment,
)


class ConfigError(ValueError):
    """Bad key, bad value, or missing required key in a configuration."""


REQUIRED_KEYS = ("p_pd_success", "p_ss_success", "s_pd_success", "s_sd_success")

# key -> (converter, default); None default means the key is required
_CONFIG_SCHEMA = {
    "p_pd_success": (float, None),
    "p_ss_success": (float, None),
    "s_pd_success": (float, None),
    "s_sd_success": (float, None),
    "lambda_ep": (float, 0.6),
    "lambda_es": (float, 0.6),
    "policy": (str, "coop"),
    "access_prob_a": (float, 0.5),
    "mode": (str, "analytic"),
    "lambda_p_grid_max": (float, 0.6),
    "lambda_p_grid_step": (float, 0.005),
    "a_grid_step": (float, 0.05),
    "bisect_tol": (float, 1e-4),
    "horizon_slots": (int, 200_000),
    "burn_in_slots": (int, 20_000),
    "replications": (int, 5),
    "seed": (int, 42),
    "drift_epsilon": (float, 0.01),
}


def _parse_kv(text: str) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment; unknown keys rejected."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config key: {key!r}")
        raw[key] = value
    return raw


def _convert(raw: dict[str, str]) -> dict:
    values = {}
    missing = [key for key in REQUIRED_KEYS if key not in raw]
    if missing:
        raise ConfigError(
            "missing required keys: " + ", ".join(missing)
        )
    for key, (convert, default) in _CONFIG_SCHEMA.items():
        if key in raw:
            try:
                values[key] = convert(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r}") from exc
        else:
            values[key] = default
    return values


def build_spec(raw: dict[str, str], name: str = "custom") -> ExperimentSpec:
    """Validated ExperimentSpec from raw key/value strings."""
    values = _convert(raw)
    try:
        params = validate_params(
            SystemParams(
                values["p_pd_success"], values["p_ss_success"],
                values["s_pd_success"], values["s_sd_success"],
                values["lambda_ep"], values["lambda_es"],
            )
        )
        try:
            kind = PolicyKind(values["policy"])
        except ValueError:
            valid = ", ".join(k.value for k in PolicyKind)
            raise ConfigError(
                f"bad value for 'policy': {values['policy']!r} (valid: {valid})"
            ) from None
        policy = PolicySpec(kind, values["access_prob_a"])
        try:
            mode = Mode(values["mode"])
        except ValueError:
            valid = ", ".join(m.value for m in Mode)
            raise ConfigError(
                f"bad value for 'mode': {values['mode']!r} (valid: {valid})"
            ) from None
        grids = SweepGrids(
            default_lambda_p_grid(values["lambda_p_grid_max"], values["lambda_p_grid_step"]),
            default_a_grid(values["a_grid_step"]),
            values["bisect_tol"],
        )
        sim = SimConfig(
            horizon_slots=values["horizon_slots"],
            burn_in_slots=values["burn_in_slots"],
            replications=values["replications"],
            seed=values["seed"],
            drift_epsilon=values["drift_epsilon"],
        )
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentSpec(name, params, (policy,), mode, grids, sim)


def parse_config(text: str, name: str = "custom") -> ExperimentSpec:
    """Parse a flat config file into a validated ExperimentSpec."""
    return build_spec(_parse_kv(text), name)


def _parse_set_pairs(pairs: list[str]) -> dict[str, str]:
    raw: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        if key not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config key: {key!r}")
        raw[key] = value
    return raw


CSV_HEADER = "lambda_p,lambda_s_max,label,source,uncertain"


def emit_boundary_csv(report: ComparisonReport, out_dir: Path | str) -> list[Path]:
    """Write one CSV per boundary; rows ascend in lambda_p, 6 decimal places."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for lb in report.boundaries:
        path = out_dir / f"{report.experiment}_{lb.curve}_{lb.source}.csv"
        lines = [CSV_HEADER]
        for lp, ls, unc in zip(
            lb.boundary.lambda_p_grid, lb.boundary.lambda_s_max, lb.uncertain
        ):
            flag = "true" if unc else "false"
            lines.append(
                f"{lp:.6f},{ls:.6f},{lb.boundary.label.value},{lb.source},{flag}"
            )
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_boundary_csv(path: Path | str) -> LabeledBoundary:
    """Parse a CSV written by emit_boundary_csv back into a LabeledBoundary."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: missing or wrong CSV header")
    grid, values, uncertain = [], [], []
    label = None
    source = "analytic"
    for line in lines[1:]:
        if not line.strip():
            continue
        lp, ls, label_str, source, flag = line.split(",")
        grid.append(float(lp))
        values.append(float(ls))
        label = RegionLabel(label_str)
        uncertain.append(flag == "true")
    boundary = RegionBoundary(
        tuple(grid), tuple(values), label if label is not None else RegionLabel.UNION
    )
    return LabeledBoundary(path.stem, source, boundary, tuple(uncertain))


def _boundary_index(report: ComparisonReport) -> dict[tuple[str, str], LabeledBoundary]:
    return {(lb.curve, lb.source): lb for lb in report.boundaries}


def _any_source(index, curve: str) -> LabeledBoundary | None:
    return index.get((curve, "analytic")) or index.get((curve, "simulated"))


def _reference_lines(spec: ExperimentSpec, report: ComparisonReport) -> list[str]:
    def ref(name: str, computed: float, reference: float) -> str:
        return (
            f"{name}: computed {computed:.6f}, reference {reference}, "
            f"|diff| {abs(computed - reference):.6f}"
        )

    index = _boundary_index(report)
    lines: list[str] = []
    if spec.name in ("fig4", "fig6"):
        lines.append(ref("pu cutoff rate", pu_service_rate(spec.params), 0.34))
    if spec.name == "fig5":
        low = _any_source(index, "union_es0.5")
        high = _any_source(index, "union_es1")
        if low is not None:
            lines.append(ref("su intercept at lambda_es=0.5", low.boundary.lambda_s_max[0], 0.35))
        if low is not None and high is not None:
            tol = spec.grids.bisect_tol
            onset = None
            diffs = [
                abs(a - b)
                for a, b in zip(low.boundary.lambda_s_max, high.boundary.lambda_s_max)
            ]
            for i in range(len(diffs)):
                if all(d < 2 * tol for d in diffs[i:]):
                    onset = low.boundary.lambda_p_grid[i]
                    break
            if onset is not None:
                lines.append(ref("boundary coincidence onset", onset, 0.29))
    if spec.name in ("fig9", "fig10") and report.crossover is not None:
        reference = 0.075 if spec.name == "fig9" else 0.15
        lines.append(ref("crossover pu rate", report.crossover.predicted, reference))
        if report.crossover.measured is not None:
            lines.append(
                f"crossover on grid: {report.crossover.measured:.6f} "
                f"(closed form {report.crossover.predicted:.6f})"
            )
    return lines


def _summarize(spec: ExperimentSpec, report: ComparisonReport, paths: list[Path]) -> list[str]:
    lines = [f"experiment: {report.experiment}", f"seed: {report.seed}"]
    for lb in report.boundaries:
        values = lb.boundary.lambda_s_max
        peak = values[0] if values else 0.0
        nonzero = [lp for lp, v in zip(lb.boundary.lambda_p_grid, values) if v > 0.0]
        cutoff = max(nonzero) if nonzero else 0.0
        lines.append(
            f"curve {lb.curve} ({lb.source}): su bound {peak:.4f} at lambda_p=0, "
            f"last nonzero at lambda_p={cutoff:.4f}"
        )
    if report.max_gap is not None:
        lines.append(f"max analytic-vs-simulated gap: {report.max_gap:.6f}")
    lines.extend(_reference_lines(spec, report))
    lines.extend(f"wrote {p}" for p in paths)
    return lines


def reproduce(figure_name: str, out_dir: Path | str = "out", workers: int | None = None):
    """Run a built-in figure scenario, write its CSVs, and return summary lines."""
    try:
        spec = builtin_experiment(figure_name)
    except KeyError:
        valid = ", ".join(s.name for s in builtin_experiments())
        raise ConfigError(
            f"unknown figure {figure_name!r}; valid names: {valid}"
        ) from None
    report = run_experiment(spec, workers=workers)
    paths = emit_boundary_csv(report, out_dir)
    return paths, _summarize(spec, report, paths)


def _load_spec(args: argparse.Namespace) -> ExperimentSpec:
    raw: dict[str, str] = {}
    if args.config:
        raw = _parse_kv(Path(args.config).read_text())
    raw.update(_parse_set_pairs(args.set or []))
    return build_spec(raw)


def _cmd_boundaries(args: argparse.Namespace, mode: Mode) -> int:
    spec = replace(_load_spec(args), mode=mode)
    report = run_experiment(spec)
    paths = emit_boundary_csv(report, Path(args.out))
    for line in _summarize(spec, report, paths):
        print(line)
    return 0


def _cmd_crossover(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    spec = replace(
        spec,
        policies=(
            PolicySpec(PolicyKind.COOPERATIVE, spec.policies[0].access_prob_a),
            PolicySpec(PolicyKind.NON_COOPERATIVE),
        ),
        mode=Mode.ANALYTIC,
    )
    constant, predictor = crossover_lambda_p(spec.params)
    report = run_experiment(spec)
    paths = emit_boundary_csv(report, Path(args.out))
    print(f"experiment: {spec.name}")
    print(f"seed: {report.seed}")
    print(f"channel constant: {constant:.6f}")
    print(f"crossover pu rate at lambda_es={spec.params.lambda_es}: {predictor(spec.params.lambda_es):.6f}")
    if report.crossover is not None and report.crossover.measured is not None:
        print(f"crossover on grid: {report.crossover.measured:.6f}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_reproduce(args: argparse.Namespace) -> int:
    _, lines = reproduce(args.figure, Path(args.out))
    for line in lines:
        print(line)
    return 0


def _cmd_list(_args: argparse.Namespace) -> int:
    for spec in builtin_experiments():
        policies = ", ".join(
            p.kind.value + (f"(a={p.access_prob_a:g})" if p.kind is not PolicyKind.NON_COOPERATIVE else "")
            for p in spec.policies
        )
        print(f"{spec.name}: lambda_ep={spec.params.lambda_ep}, "
              f"lambda_es={spec.params.lambda_es}, policies: {policies}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="flat key = value config file")
    parser.add_argument(
        "--set", metavar="KEY=VALUE", action="append",
        help="override one config key (repeatable)",
    )
    parser.add_argument("--out", metavar="DIR", default="out", help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehcrn",
        description="Stable-throughput regions for an energy-harvesting "
        "cooperative cognitive radio link.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("region", "analytic boundary for the configured scenario"),
        ("simulate", "simulated boundary for the configured scenario"),
        ("compare", "analytic and simulated boundaries plus their gap"),
        ("crossover", "cooperative vs non-cooperative crossover analysis"),
    ):
        sp = sub.add_parser(name, help=help_text)
        _add_common(sp)
    rp = sub.add_parser("reproduce", help="run a built-in figure scenario")
    rp.add_argument("figure", help="scenario name, see `ehcrn list`")
    rp.add_argument("--out", metavar="DIR", default="out", help="output directory")
    sub.add_parser("list", help="list built-in figure scenarios")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "region": lambda a: _cmd_boundaries(a, Mode.ANALYTIC),
        "simulate": lambda a: _cmd_boundaries(a, Mode.SIMULATE),
        "compare": lambda a: _cmd_boundaries(a, Mode.COMPARE),
        "crossover": _cmd_crossover,
        "reproduce": _cmd_reproduce,
        "list": _cmd_list,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ParamError, UnstablePrimaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
