"""Run scenarios end to end and write their CSV and JSON outputs.

The functions here are shared by the command line and the tool server; they
return plain dictionaries with a ``passed`` flag for every requested check.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from active_consensus import analysis
from active_consensus.analysis import CertificateMode
from active_consensus.config import ScenarioConfig
from active_consensus.containment import ContainmentReport, LeaderEnsemble, ObservationMap, run_containment
from active_consensus.ct_sim import Trajectory
from active_consensus.dt_sim import simulate
from active_consensus.errors import ConfigError
from active_consensus.graph import spectral_decomposition
from active_consensus.schedule import verify_dwell

logger = logging.getLogger(__name__)

PRECISION = ".17g"


def _fmt(value: float) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), PRECISION)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(value) for value in row])
    return path


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path: Path, data: Dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=2), encoding="utf-8")
    return path


def write_trajectory_csv(path: Path, trajectory: Trajectory) -> Path:
    """Columns ``[k,] t, x_1..x_n, v_1..v_n, avg, err_1..err_n``."""
    n = trajectory.n
    labels = [str(i) for i in range(1, n + 1)]
    header = ["t"] + [f"x_{i}" for i in labels] + [f"v_{i}" for i in labels] + ["avg"] + [f"err_{i}" for i in labels]
    columns = [trajectory.times[:, None], trajectory.x, trajectory.v, trajectory.avg[:, None], trajectory.errors]
    if trajectory.steps is not None:
        header = ["k"] + header
        columns = [trajectory.steps[:, None]] + columns
    table = np.hstack(columns)
    rows = [[int(row[0])] + list(row[1:]) if trajectory.steps is not None else row for row in table]
    return _write_rows(path, header, rows)


def write_error_csv(path: Path, trajectory: Trajectory, bound: Optional[np.ndarray] = None) -> Path:
    """Columns ``t, max_err`` and, with a bound, ``bound, margin``."""
    header = ["t", "max_err"]
    columns = [trajectory.times, trajectory.max_error]
    if bound is not None:
        header += ["bound", "margin"]
        columns += [bound, bound - trajectory.max_error]
    return _write_rows(path, header, zip(*columns))


def write_containment_csv(directory: Path, report: ContainmentReport) -> List[Path]:
    n = report.followers.shape[1]
    header = ["k", "t"]
    for i in range(1, n + 1):
        header += [f"x_{i}", f"y_{i}"]
    header += ["cx", "cy", "plain_cx", "plain_cy", "err", "inside"]
    rows = []
    for k, t in enumerate(report.times):
        row: List = [k, t]
        row += report.followers[k].ravel().tolist()
        row += report.centroid[k].tolist() + report.plain_centroid[k].tolist()
        row += [report.error[k], bool(report.centroid_inside[k])]
        rows.append(row)
    follower_path = _write_rows(directory / "containment.csv", header, rows)

    hull_rows = []
    for k, vertices in enumerate(report.hulls):
        for index, (x, y) in enumerate(vertices):
            hull_rows.append([k, index, x, y])
    hull_path = _write_rows(directory / "hulls.csv", ["k", "vertex", "x", "y"], hull_rows)
    return [follower_path, hull_path]


def _containment_weight_set(config: ScenarioConfig) -> List[np.ndarray]:
    spec = config.containment
    patterns: List[np.ndarray] = []
    for epoch in spec.observations:
        eta = np.array([1.0 if leaders else 0.0 for leaders in epoch.observed])
        if not any(np.array_equal(eta, known) for known in patterns):
            patterns.append(eta)
    return patterns


def analyze(config: ScenarioConfig) -> Dict:
    """Stability report for every weight pattern the scenario uses."""
    topology = config.build_topology()
    decomposition = spectral_decomposition(topology)
    schedule = None
    if config.schedule is not None:
        schedule = config.schedule.build(config.horizon)
        weight_set = schedule.weight_set()
    elif config.containment is not None:
        weight_set = _containment_weight_set(config)
    else:
        raise ConfigError("analyze needs a 'schedule' or a 'containment' section")

    report = analysis.stability_report(decomposition, weight_set, config.rates.delta_c)
    checks = [report["all_hurwitz"], report["all_weighted_laplacian_hurwitz"]]
    if config.rates.delta_c is not None:
        checks.append(report["all_schur"])
    if schedule is not None and config.dwell is not None:
        verdict = verify_dwell(schedule, config.dwell.build())
        report["dwell"] = {"holds": verdict.holds, "first_violation": verdict.first_violation}
        checks.append(verdict.holds)
    report["name"] = config.name
    report["passed"] = all(checks)
    return report


@dataclass
class SimulationResult:
    trajectory: Trajectory
    summary: Dict
    bound: Optional[np.ndarray] = None
    certificate: Optional[analysis.StabilityCertificate] = None


def _error_summary(trajectory: Trajectory) -> Dict:
    error = trajectory.max_error
    return {
        "samples": len(trajectory),
        "t_end": float(trajectory.times[-1]),
        "max_error": float(np.max(error)),
        "final_error": float(error[-1]),
        "conservation_drift": trajectory.conservation_drift(),
        "switch_left_limits": [
            {"t": float(trajectory.times[row]), "avg": float(avg), "max_error": float(np.nanmax(errors))}
            for row, avg, errors in zip(trajectory.switch_rows, trajectory.left_avg, trajectory.left_errors)
        ],
    }


def _domination(summary: Dict, trajectory: Trajectory, bound: np.ndarray, certificate: analysis.StabilityCertificate) -> None:
    margin = bound - trajectory.max_error
    summary["certificate"] = certificate.to_dict()
    summary["bound"] = {
        "min_margin": float(np.min(margin)),
        "violations": int(np.count_nonzero(margin < 0)),
        "dominates": bool(np.all(margin >= 0)),
    }


def simulate_ct(config: ScenarioConfig) -> SimulationResult:
    scenario = config.ct_scenario()
    x0, v0 = config.initial_state()
    trajectory = scenario.integrate(x0, v0)
    summary = {"name": config.name, "mode": "ct", "step": scenario.step, **_error_summary(trajectory)}
    bound = certificate = None
    checks = []
    if config.bounds:
        certificate = _fit(config, scenario.topology, scenario.schedule, CertificateMode.CONTINUOUS)
        bound = analysis.ct_bound_curve(certificate, scenario, x0, v0, trajectory.times)
        _domination(summary, trajectory, bound, certificate)
        checks.append(summary["bound"]["dominates"])
    summary["passed"] = all(checks)
    return SimulationResult(trajectory, summary, bound, certificate)


def simulate_dt(config: ScenarioConfig, allow_unstable: bool = False) -> SimulationResult:
    scenario = config.dt_scenario()
    d_bar = scenario.check_step(allow_unstable)
    x0, v0 = config.initial_state()
    trajectory = simulate(scenario, x0, v0)
    summary = {
        "name": config.name,
        "mode": "dt",
        "delta_c": scenario.delta_c,
        "delta_s": scenario.delta_s,
        "d_bar": d_bar,
        **_error_summary(trajectory),
    }
    bound = certificate = None
    checks = []
    if config.bounds:
        certificate = _fit(
            config, scenario.topology, scenario.schedule, CertificateMode.DISCRETE, scenario.delta_c, allow_unstable
        )
        bound = analysis.dt_bound_curve(certificate, scenario, x0, v0, trajectory.steps)
        _domination(summary, trajectory, bound, certificate)
        checks.append(summary["bound"]["dominates"])
    summary["passed"] = all(checks)
    return SimulationResult(trajectory, summary, bound, certificate)


def _fit(config, topology, schedule, mode, delta_c=None, allow_unstable=False) -> analysis.StabilityCertificate:
    spec = config.certificate
    return analysis.fit_certificate(
        spectral_decomposition(topology),
        None,
        schedule,
        mode,
        delta_c=delta_c,
        sample_step=spec.sample_step,
        seeds=spec.fit_seeds,
        starts_per_seed=spec.starts_per_seed,
        safety=spec.safety,
        dwell=config.dwell_stats(),
        allow_unstable=allow_unstable,
    )


def certify(config: ScenarioConfig, mode: Optional[str] = None, allow_unstable: bool = False) -> SimulationResult:
    """Fit a certificate, check it on held-out start times and test bound domination.

    Discrete mode is used when ``rates.delta_c`` is set unless ``mode`` says otherwise.
    """
    if mode is None:
        mode = "dt" if config.rates.delta_c is not None else "ct"
    forced = config.model_copy(update={"bounds": True})
    if forced.dwell is None:
        raise ConfigError("certify needs a 'dwell' declaration")
    result = simulate_dt(forced, allow_unstable) if mode == "dt" else simulate_ct(forced)

    check = analysis.verify_certificate(
        result.certificate,
        spectral_decomposition(config.build_topology()),
        config.build_schedule(),
        seeds=config.certificate.verify_seeds,
        starts_per_seed=config.certificate.starts_per_seed,
    )
    result.summary["held_out"] = check.to_dict()
    result.summary["passed"] = bool(result.summary["passed"] and check.holds)
    return result


def containment(config: ScenarioConfig, allow_unstable: bool = False) -> ContainmentReport:
    spec = config.containment
    if spec is None:
        raise ConfigError("containment needs a 'containment' section with leaders and observations")
    rates = config.rates
    if rates.delta_c is None or rates.delta_s is None:
        raise ConfigError("containment needs rates.delta_c and rates.delta_s")
    steps = rates.steps if rates.steps is not None else int(math.floor(config.horizon / rates.delta_c + 1e-9))
    topology = config.build_topology()
    leaders = LeaderEnsemble([leader.waypoints for leader in spec.leaders], spec.max_displacement, spec.freeze_at)
    obs_map = ObservationMap([(epoch.t, epoch.observed) for epoch in spec.observations], topology.n, leaders.m)
    x0 = None if spec.initial_positions is None else np.array(spec.initial_positions, dtype=float)
    return run_containment(
        topology, obs_map, leaders, rates.delta_s, rates.delta_c, steps, x0, spec.tolerance, allow_unstable
    )


def containment_summary(config: ScenarioConfig, report: ContainmentReport) -> Dict:
    summary = {"name": config.name, **report.summary()}
    checks = [report.membership_violations == 0]
    threshold = config.containment.error_threshold
    if threshold is not None:
        summary["error_threshold"] = threshold
        checks.append(report.error[-1] <= threshold)
    summary["passed"] = all(checks)
    return summary
