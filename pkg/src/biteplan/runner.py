"""Run drivers: single scenario, weight sweep, multi-bite, calibration.

Everything here is deterministic given the config seeds; wall-clock
timings live under a single "timings" key so byte-level comparisons can
drop them. RNG streams are derived per task, never shared, so a worker
pool cannot change any result.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .bite import multibite_plan
from .config import ScenarioConfig, SweepSpec
from .costs import CostWeights, SceneCosts, pose_distance
from .geom.raycast import RayGridConfig
from .errors import InfeasibleGoalError, InvalidStartError, NoTrajectoryError
from .ftrt import (build_calibration_system, default_calibration_orientations,
                   solve_calibration, synthetic_readings)
from .plan import Trajectory, hbirrt_plan, select_trajectory
from .sample import cluster_kmedoids, sample_collision_free_goals
from .scenario import Scenario, random_scenario

RUN_REPORT_SCHEMA = "biteplan.run_report/1"
MULTIBITE_SCHEMA = "biteplan.multibite_report/1"
CALIB_SCHEMA = "biteplan.calibration_report/1"

_F = "%.17g"


def _fmt(v: float) -> str:
    return _F % v


class _Metrics:
    """Mode-independent trajectory metrics for reports and sweeps."""

    def __init__(self, scenario: Scenario, weights: CostWeights,
                 rays: RayGridConfig):
        self.scene = SceneCosts(scenario.food, scenario.proxy, scenario.mouth,
                                weights.with_mode("combined"), rays)

    def of(self, traj: Trajectory) -> dict:
        w_rot = self.scene.weights.w_rot
        comfort = [self.scene.comfort(p) for p in traj.waypoints]
        # trapezoid form of the planner's comfort edge term
        # sum(||dp|| * comfort(mid)); a longer path can only add to it
        integral = sum(
            pose_distance(a, b, w_rot) * 0.5 * (ca + cb)
            for a, b, ca, cb in zip(traj.waypoints[:-1], traj.waypoints[1:],
                                    comfort[:-1], comfort[1:]))
        return {
            "path_length": traj.path_length(w_rot),
            "path_cost": traj.path_cost,
            "total_cost": traj.total_cost,
            "efficiency_at_goal": self.scene.efficiency(traj.waypoints[-1]),
            "comfort_at_goal": comfort[-1],
            "path_mean_comfort": float(np.mean(comfort)),
            "path_comfort_integral": float(integral),
            "n_waypoints": traj.n_waypoints,
        }


def run_scenario(config: ScenarioConfig) -> dict:
    """Sample goals, cluster, plan, select; return the JSON-able report."""
    timings: dict[str, float] = {}
    t0 = time.monotonic()
    scenario = config.build_scenario()
    timings["build_s"] = time.monotonic() - t0

    t0 = time.monotonic()
    goals_all = sample_collision_free_goals(
        scenario, scenario.goal_distribution, config.budget,
        np.random.default_rng([config.seed, 0]))
    km = cluster_kmedoids(goals_all, config.k_goals,
                          w_rot=config.weights.w_rot)
    goals = [goals_all[i] for i in km.medoid_indices]
    timings["sample_s"] = time.monotonic() - t0

    t0 = time.monotonic()
    result = hbirrt_plan(scenario, goals, config.weights, config.planner,
                         np.random.default_rng([config.seed, 1]), config.rays)
    timings["plan_s"] = time.monotonic() - t0

    t0 = time.monotonic()
    metrics = _Metrics(scenario, config.weights, config.rays)
    per_goal = []
    for i, traj in enumerate(result.trajectories):
        entry = {"goal_index": i, "reached": traj is not None,
                 "goal_pose": goals[i].to_dict()}
        if traj is not None:
            entry["metrics"] = metrics.of(traj)
        per_goal.append(entry)
    best = select_trajectory(result.trajectories)
    timings["metrics_s"] = time.monotonic() - t0

    return {
        "schema": RUN_REPORT_SCHEMA,
        "version": __version__,
        "label": scenario.label,
        "seed": config.seed,
        "mode": config.weights.mode,
        "config": config.to_dict(),
        "sampled_goal_count": len(goals_all),
        "kmedoids": {
            "k": int(len(km.medoid_indices)),
            "k_reduced": km.k_reduced,
            "iterations": km.iterations,
            "converged": km.converged,
            "total_cost": km.total_cost,
        },
        "goals": per_goal,
        "selected": {
            "goal_index": best.goal_index,
            "metrics": metrics.of(best),
            "trajectory": best.to_dict(),
        },
        "stats": result.stats.to_dict(),
        "timings": timings,
    }


# -- sweep -------------------------------------------------------------------

_SWEEP_COLUMNS = [
    "cell_index", "beta_E", "beta_C", "gamma_C", "n_scenarios", "n_success",
    "mean_comfort", "std_comfort", "mean_comfort_integral",
    "mean_efficiency", "std_efficiency", "mean_path_length", "empty_cell",
]


def _sweep_task(config: ScenarioConfig, cell_index: int,
                cell: tuple[float, float, float],
                scenario_index: int) -> tuple[int, int, dict | None]:
    """One (cell, scenario) run; self-seeds so pools cannot reorder
    results. All RNG streams depend only on (base_seed, scenario_index),
    never on the cell: every cell sees the same scenario, the same goal
    candidates, and the same planner draws, so cell-to-cell differences
    are caused by the weights alone (common random numbers)."""
    base = config.sweep.base_seed
    be, bc, gc = cell
    scenario = random_scenario(
        np.random.default_rng([base, 11, scenario_index]),
        food_segments=24,
        goal_distribution=config.goal_distribution)
    weights = replace(config.weights, mode="combined",
                      beta_E=be, beta_C=bc, gamma_C=gc)
    try:
        goals_all = sample_collision_free_goals(
            scenario, scenario.goal_distribution, config.budget,
            np.random.default_rng([base, 13, scenario_index]))
        km = cluster_kmedoids(goals_all, config.k_goals, w_rot=weights.w_rot)
        goals = [goals_all[i] for i in km.medoid_indices]
        result = hbirrt_plan(
            scenario, goals, weights, config.planner,
            np.random.default_rng([base, 19, scenario_index]),
            config.rays)
        best = select_trajectory(result.trajectories)
    except (InfeasibleGoalError, InvalidStartError, NoTrajectoryError):
        return cell_index, scenario_index, None
    metrics = _Metrics(scenario, config.weights, config.rays)
    return cell_index, scenario_index, metrics.of(best)


def run_sweep(config: ScenarioConfig, workers: int | None = None,
              progress=None) -> tuple[str, dict]:
    """Paired-scenario sweep over the weight grid.

    Returns (csv_text, summary). Scenario i is identical in every cell,
    so cell-to-cell differences isolate the weights. Zero-success cells
    emit NaN means and set the flag column.
    """
    spec: SweepSpec = config.sweep
    cells = spec.cells()
    if workers is None:
        workers = int(os.environ.get("BITEPLAN_WORKERS", "1"))
    tasks = [(ci, cell, si) for ci, cell in enumerate(cells)
             for si in range(spec.scenarios_per_cell)]
    results: dict[tuple[int, int], dict | None] = {}
    t0 = time.monotonic()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_sweep_task, config, ci, cell, si)
                    for ci, cell, si in tasks]
            for n_done, fut in enumerate(futs):
                ci, si, m = fut.result()
                results[(ci, si)] = m
                if progress:
                    progress(n_done + 1, len(tasks))
    else:
        for n_done, (ci, cell, si) in enumerate(tasks):
            ci, si, m = _sweep_task(config, ci, cell, si)
            results[(ci, si)] = m
            if progress:
                progress(n_done + 1, len(tasks))
    elapsed = time.monotonic() - t0

    lines = [",".join(_SWEEP_COLUMNS)]
    cell_rows = []
    for ci, (be, bc, gc) in enumerate(cells):
        ms = [results[(ci, si)] for si in range(spec.scenarios_per_cell)]
        ok = [m for m in ms if m is not None]
        empty = not ok
        comfort = np.array([m["path_mean_comfort"] for m in ok])
        integral = np.array([m["path_comfort_integral"] for m in ok])
        eff = np.array([m["efficiency_at_goal"] for m in ok])
        plen = np.array([m["path_length"] for m in ok])
        row = {
            "cell_index": ci, "beta_E": be, "beta_C": bc, "gamma_C": gc,
            "n_scenarios": spec.scenarios_per_cell, "n_success": len(ok),
            "mean_comfort": float(comfort.mean()) if ok else float("nan"),
            "std_comfort": float(comfort.std()) if ok else float("nan"),
            "mean_comfort_integral":
                float(integral.mean()) if ok else float("nan"),
            "mean_efficiency": float(eff.mean()) if ok else float("nan"),
            "std_efficiency": float(eff.std()) if ok else float("nan"),
            "mean_path_length": float(plen.mean()) if ok else float("nan"),
            "empty_cell": empty,
        }
        cell_rows.append(row)
        lines.append(",".join(
            str(row[c]) if c in ("cell_index", "n_scenarios", "n_success")
            else ("true" if row[c] else "false") if c == "empty_cell"
            else _fmt(row[c]) for c in _SWEEP_COLUMNS))
    csv_text = "\n".join(lines) + "\n"

    summary = {
        "schema": "biteplan.sweep_summary/1",
        "version": __version__,
        "base_seed": spec.base_seed,
        "cells": cell_rows,
        "n_cells": len(cells),
        "scenarios_per_cell": spec.scenarios_per_cell,
        "timings": {"total_s": elapsed},
    }
    return csv_text, summary


# -- multibite ---------------------------------------------------------------

def run_multibite(config: ScenarioConfig) -> dict:
    scenario = config.build_scenario()
    t0 = time.monotonic()
    outcome = multibite_plan(
        scenario, config.weights, config.planner, config.budget,
        k_goals=config.k_goals, stop_fraction=config.multibite.stop_fraction,
        seed=config.seed, max_bites=config.multibite.max_bites,
        ray_config=config.rays)
    elapsed = time.monotonic() - t0
    bites = []
    for step in outcome.steps:
        bites.append({
            "bite_index": step.bite.bite_index,
            "consumed_volume": step.bite.consumed_volume,
            "remaining_volume": step.bite.remaining_volume,
            "remaining_fraction": step.bite.remaining_volume
            / outcome.initial_volume,
            "goal_pose": step.goal.to_dict(),
            "trajectory": step.trajectory.to_dict(),
        })
    return {
        "schema": MULTIBITE_SCHEMA,
        "version": __version__,
        "label": scenario.label,
        "seed": config.seed,
        "mode": config.weights.mode,
        "stop_fraction": config.multibite.stop_fraction,
        "initial_volume": outcome.initial_volume,
        "consumed_total": outcome.consumed_total,
        "consumed_fraction": outcome.consumed_fraction,
        "n_bites": len(outcome.steps),
        "partial": outcome.partial,
        "partial_reason": outcome.partial_reason,
        "bites": bites,
        "timings": {"total_s": elapsed},
    }


# -- calibration demo ----------------------------------------------------

def run_calibration_demo(noise_sigma: float = 0.0, seed: int = 0,
                         torque_radius: float = 0.1) -> dict:
    """Synthetic pose cycle -> solve -> report truth vs estimate."""
    if noise_sigma < 0.0:
        from .errors import InvalidSpecError
        raise InvalidSpecError("noise_sigma must be >= 0")
    rng = np.random.default_rng([seed, 17])
    mass = float(rng.uniform(0.01, 0.2))
    f_bias = rng.normal(0.0, 0.5, 3)
    t_bias = rng.normal(0.0, 0.05, 3)
    s_rot = np.eye(3)
    oris = default_calibration_orientations()
    t0 = time.monotonic()
    samples = synthetic_readings(
        mass, f_bias, t_bias, oris, s_rot, torque_radius,
        noise_sigma=noise_sigma, rng=rng if noise_sigma > 0.0 else None)
    calib = solve_calibration(samples, s_rot, torque_radius)
    a, _ = build_calibration_system(samples, s_rot, torque_radius)
    # parameter covariance of the least-squares estimate
    cov = np.linalg.inv(a.T @ a) * noise_sigma ** 2
    sigmas = np.sqrt(np.diag(cov))
    elapsed = time.monotonic() - t0
    est = np.array([calib.mass, *calib.force_bias, *calib.torque_bias])
    true = np.array([mass, *f_bias, *t_bias])
    err = est - true
    return {
        "schema": CALIB_SCHEMA,
        "version": __version__,
        "seed": seed,
        "noise_sigma": noise_sigma,
        "n_samples": len(samples),
        "true": {"mass": mass, "force_bias": f_bias.tolist(),
                 "torque_bias": t_bias.tolist()},
        "estimated": calib.to_dict(),
        "abs_error": np.abs(err).tolist(),
        "max_abs_error": float(np.abs(err).max()),
        "predicted_sigma": sigmas.tolist(),
        "within_3_sigma": bool(np.all(np.abs(err) <= 3.0 * sigmas))
        if noise_sigma > 0.0 else True,
        "timings": {"total_s": elapsed},
    }
