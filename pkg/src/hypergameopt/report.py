"""Scenario files, batch execution, CSV tables and SVG figures.

Scenario files are line-oriented key=value with `[scenario]` section
headers. Keys before the first header set the system and per-file defaults;
each section describes one run. Results come back in file order regardless
of worker completion order, and rerunning a file yields byte-identical
CSVs.
"""

from __future__ import annotations

import concurrent.futures as cf
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import fan, hvac, svgplot
from .errors import MissingSeries, ParseError, SolverFailure, UnknownMode
from .hypergame import AttackOutcome, hypergame_level
from .scenarios import evaluate_fan_scenario, fan_scenario

log = logging.getLogger("hypergameopt")

FAN_MODES = {
    "none": "none",
    "theta_true": "theta_true",
    "theta_perception": "theta_perception",
    "powermax": "constraint_powermax",
    "break": "constraint_break",
}
FAN_BELIEFS = {
    "normal": "normal",
    "theta": "anticipates_theta",
    "powermax": "anticipates_powermax",
    "break": "anticipates_break",
}
HVAC_MODES = ("static", "dynamic", "baseline")

FAN_COLUMNS = ["label", "mode", "belief", "double_bluff", "m", "p", "power",
               "power_perceived", "violation", "envelope_deviation",
               "d1", "d2", "d3", "budget_use", "level"]
HVAC_COLUMNS = ["label", "mode", "horizon", "power_baseline", "power_actual",
                "power_perceived", "pct_actual", "pct_perceived",
                "d_beta", "d_gamma", "lambda_mean", "dt0_final_over_mean"]


@dataclass
class ScenarioSpec:
    label: str
    mode: str
    belief: str = "normal"
    double_bluff: bool = False
    budget: float | None = None
    horizon: int | None = None
    branch: str = "best"
    overrides: dict[str, float] = field(default_factory=dict)


@dataclass
class ScenarioFile:
    system: str
    scenarios: list[ScenarioSpec]


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    outcome: AttackOutcome | None = None
    trajectory: hvac.HvacTrajectory | None = None
    baseline_power: float | None = None
    level: str = ""
    error: str | None = None


_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}

_SCENARIO_KEYS = {"label", "mode", "belief", "double_bluff", "budget",
                  "horizon", "branch"}
_OVERRIDE_KEYS = {"theta1", "theta2", "theta3", "c_m", "c_p", "c_r",
                  "beta", "gamma", "t_zone_initial", "t_outside"}


def parse_scenario_file(path: str | Path) -> ScenarioFile:
    """Parse the key=value scenario format; raises ParseError with the
    offending line number."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such scenario file: {path}")
    system: str | None = None
    defaults: dict[str, str] = {}
    sections: list[dict[str, str]] = []
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "[scenario]":
            current = {}
            sections.append(current)
            continue
        if line.startswith("["):
            raise ParseError(f"{path}:{lineno}: unknown section {line!r}")
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if current is None:
            if key == "system":
                system = value.lower()
            else:
                defaults[key] = value
        else:
            current[key] = value
    if system not in ("fan", "hvac"):
        raise ParseError(f"{path}: file must declare system = fan or hvac")

    specs: list[ScenarioSpec] = []
    labels: set[str] = set()
    for idx, section in enumerate(sections):
        merged = {**defaults, **section}
        label = merged.pop("label", f"scenario_{idx + 1}")
        if label in labels:
            raise ParseError(f"{path}: duplicate label {label!r}")
        labels.add(label)
        mode = merged.pop("mode", "none").lower()
        if system == "fan" and mode not in FAN_MODES:
            raise UnknownMode(f"{path}: {label}: unknown fan mode {mode!r}")
        if system == "hvac" and mode not in HVAC_MODES:
            raise UnknownMode(f"{path}: {label}: unknown hvac mode {mode!r}")
        belief = merged.pop("belief", "normal").lower()
        if system == "fan" and belief not in FAN_BELIEFS:
            raise UnknownMode(f"{path}: {label}: unknown belief {belief!r}")
        spec = ScenarioSpec(label=label, mode=mode, belief=belief)
        if "double_bluff" in merged:
            flag = merged.pop("double_bluff").lower()
            if flag not in _BOOL:
                raise ParseError(f"{path}: {label}: bad boolean {flag!r}")
            spec.double_bluff = _BOOL[flag]
        try:
            if "budget" in merged:
                spec.budget = float(merged.pop("budget"))
            if "horizon" in merged:
                spec.horizon = int(merged.pop("horizon"))
            if "branch" in merged:
                spec.branch = merged.pop("branch").lower()
            for key in list(merged):
                if key in _OVERRIDE_KEYS:
                    spec.overrides[key] = float(merged.pop(key))
        except ValueError as exc:
            raise ParseError(f"{path}: {label}: {exc}") from exc
        if merged:
            raise ParseError(f"{path}: {label}: unknown keys {sorted(merged)}")
        specs.append(spec)
    return ScenarioFile(system=system, scenarios=specs)


def _fan_params(spec: ScenarioSpec) -> fan.FanParams:
    kw: dict[str, Any] = {}
    o = spec.overrides
    if {"theta1", "theta2", "theta3"} & o.keys():
        kw["theta"] = (o.get("theta1", 1.0), o.get("theta2", 1.0),
                       o.get("theta3", 2.0))
    for name in ("c_m", "c_p", "c_r"):
        if name in o:
            kw[name] = o[name]
    params = fan.FanParams(**kw)
    if spec.budget is not None:
        params = replace(params, delta_theta_max=spec.budget,
                         delta_c_max=spec.budget)
    return params


def _hvac_params(spec: ScenarioSpec) -> hvac.HvacParams:
    kw: dict[str, Any] = {}
    for name in ("beta", "gamma", "t_zone_initial", "t_outside"):
        if name in spec.overrides:
            kw[name] = spec.overrides[name]
    if spec.horizon is not None:
        kw["horizon"] = spec.horizon
    params = hvac.HvacParams(**kw)
    if spec.budget is not None:
        if spec.mode == "dynamic":
            params = replace(params, delta_t_max=spec.budget)
        else:
            params = replace(params, delta_max=spec.budget)
    return params


def run_one(system: str, spec: ScenarioSpec) -> ScenarioResult:
    result = ScenarioResult(spec=spec)
    try:
        if system == "fan":
            scenario = fan_scenario(_fan_params(spec), FAN_MODES[spec.mode],
                                    FAN_BELIEFS[spec.belief], spec.double_bluff)
            result.outcome = evaluate_fan_scenario(scenario, branch=spec.branch)
            result.level = hypergame_level(scenario).level
        else:
            params = _hvac_params(spec)
            base = hvac.hvac_baseline(params)
            result.baseline_power = base.total_power
            if spec.mode == "baseline":
                result.trajectory = base
            elif spec.mode == "static":
                result.outcome, result.trajectory = hvac.hvac_static_attack(params)
            else:
                result.outcome, result.trajectory = hvac.hvac_dynamic_attack(params)
    except Exception as exc:  # per-scenario attribution, aggregated by caller
        log.error("scenario %s failed: %s", spec.label, exc)
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def run_scenarios(path: str | Path, jobs: int = 1,
                  seed: int | None = None) -> tuple[ScenarioFile, list[ScenarioResult]]:
    """Execute every scenario in the file; output order follows file order."""
    sfile = parse_scenario_file(path)
    if seed is not None:
        log.info("seed %d noted; bundled scenarios are deterministic", seed)
    if jobs <= 1:
        results = [run_one(sfile.system, spec) for spec in sfile.scenarios]
    else:
        with cf.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_one, sfile.system, spec)
                       for spec in sfile.scenarios]
            results = [f.result() for f in futures]
    return sfile, results


def _num(value: float | None, ndigits: int | None) -> str:
    if value is None:
        return ""
    if ndigits is not None:
        return f"{value:.{ndigits}f}"
    return f"{value:.12g}"


def results_to_csv(sfile: ScenarioFile, results: list[ScenarioResult],
                   ndigits: int | None = None) -> str:
    """One CSV row per scenario with the column set fixed per system."""
    rows: list[list[str]] = []
    if sfile.system == "fan":
        header = FAN_COLUMNS
        for r in results:
            if r.error or r.outcome is None:
                rows.append([r.spec.label, r.spec.mode, r.spec.belief,
                             str(r.spec.double_bluff).lower(),
                             *[""] * 10, f"error: {r.error}"])
                continue
            o = r.outcome
            delta = o.perturbation.get("d_theta", o.perturbation.get("d_c"))
            delta = np.zeros(3) if delta is None else np.asarray(delta, float)
            rows.append([
                r.spec.label, r.spec.mode, r.spec.belief,
                str(r.spec.double_bluff).lower(),
                _num(float(o.defender_action[0]), ndigits),
                _num(float(o.defender_action[1]), ndigits),
                _num(o.true_cost, ndigits),
                _num(o.perceived_cost, ndigits),
                _num(o.violation, ndigits),
                _num(o.envelope_deviation, ndigits),
                _num(float(delta[0]), ndigits), _num(float(delta[1]), ndigits),
                _num(float(delta[2]), ndigits),
                _num(o.budget_use(), ndigits), r.level,
            ])
    else:
        header = HVAC_COLUMNS
        for r in results:
            if r.error or r.trajectory is None:
                rows.append([r.spec.label, r.spec.mode,
                             str(r.spec.horizon or ""), *[""] * 8,
                             f"error: {r.error}"])
                continue
            traj = r.trajectory
            base = r.baseline_power
            actual = traj.total_power
            perceived = traj.perceived_power
            pct_a = 100.0 * (actual / base - 1.0) if base else None
            pct_p = 100.0 * (perceived / base - 1.0) if base else None
            o = r.outcome
            d_beta = d_gamma = None
            dt0_ratio = None
            if o is not None:
                d_beta = o.perturbation.get("d_beta")
                d_gamma = o.perturbation.get("d_gamma")
                dt0 = o.perturbation.get("d_t0")
                if dt0 is not None and len(dt0) > 1:
                    earlier = np.mean(np.abs(dt0[:-1]))
                    dt0_ratio = abs(float(dt0[-1])) / earlier if earlier > 0 else None
            lam = traj.duals.get("lambda")
            rows.append([
                r.spec.label, r.spec.mode, str(len(traj.controls.m)),
                _num(base, ndigits), _num(actual, ndigits),
                _num(perceived, ndigits), _num(pct_a, ndigits),
                _num(pct_p, ndigits), _num(d_beta, ndigits),
                _num(d_gamma, ndigits),
                _num(float(np.mean(lam)) if lam is not None else None, ndigits),
                _num(dt0_ratio, ndigits),
            ])
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def emit_figures(sfile: ScenarioFile, results: list[ScenarioResult],
                 out_dir: str | Path) -> list[Path]:
    """Write the SVG figures each result supports; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for r in results:
        if r.error:
            continue
        if sfile.system == "fan":
            written.extend(_fan_figures(r, out_dir))
        else:
            written.extend(_hvac_figures(r, out_dir))
    return written


def _fan_figures(r: ScenarioResult, out_dir: Path) -> list[Path]:
    if r.outcome is None or "d_theta" not in r.outcome.perturbation:
        return []
    d_theta = np.asarray(r.outcome.perturbation["d_theta"], dtype=float)
    if not np.any(d_theta):
        return []
    params = _fan_params(r.spec)
    theta = params.theta_arr
    base = fan.fan_baseline(params, cross_check=False)
    svg = svgplot.fan_contour_chart(
        theta_true=theta, theta_perceived=theta + d_theta, c=params.c_arr,
        optimum_true=base.action, optimum_perceived=r.outcome.defender_action,
        title=f"{r.spec.label}: perceived vs true objective")
    path = out_dir / f"{r.spec.label}_contours.svg"
    path.write_text(svg)
    return [path]


def _hvac_figures(r: ScenarioResult, out_dir: Path) -> list[Path]:
    traj = r.trajectory
    if traj is None:
        raise MissingSeries(f"{r.spec.label}: no trajectory to plot")
    written = []
    path = out_dir / f"{r.spec.label}_temperatures.svg"
    path.write_text(svgplot.line_chart(
        [("zone (true)", traj.t_n_true),
         ("zone (perceived)", traj.t_n_perceived),
         ("supply", traj.controls.t_sn),
         ("chiller out", traj.controls.t_s)],
        title=f"{r.spec.label}: temperature trajectories",
        x_label="step", y_label="temperature"))
    written.append(path)
    delta_t = traj.delta_t_zone
    if delta_t.size == 0:
        raise MissingSeries(f"{r.spec.label}: empty temperature-gap series")
    if np.any(delta_t != 0.0):
        path = out_dir / f"{r.spec.label}_delta_t.svg"
        path.write_text(svgplot.line_chart(
            [("zone gap", delta_t),
             ("duct gap", traj.t_i_true - traj.t_i_perceived)],
            title=f"{r.spec.label}: true minus perceived temperature",
            x_label="step", y_label="difference"))
        written.append(path)
    if r.outcome is not None and "d_t0" in r.outcome.perturbation:
        dt0 = np.asarray(r.outcome.perturbation["d_t0"], dtype=float)
        if dt0.size == 0:
            raise MissingSeries(f"{r.spec.label}: empty perturbation series")
        path = out_dir / f"{r.spec.label}_dt0.svg"
        path.write_text(svgplot.line_chart(
            [("outside-temperature shift", dt0)],
            title=f"{r.spec.label}: perceived outside-temperature shifts",
            x_label="step", y_label="shift"))
        written.append(path)
    return written


def failures(results: list[ScenarioResult]) -> list[str]:
    return [f"{r.spec.label}: {r.error}" for r in results if r.error]


def require_success(results: list[ScenarioResult]) -> None:
    bad = failures(results)
    if bad:
        raise SolverFailure("; ".join(bad))
