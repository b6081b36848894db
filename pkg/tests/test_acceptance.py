"""Release gates: ten end-to-end behavior checks, one per requirement.

Each gate prints a single PASS/FAIL line on the real stdout (visible
under pytest's capture) and then asserts. Planner knobs are chosen lean
so the whole module stays inside a coffee break on one core; every seed
below was fixed before the thresholds were checked, and the thresholds
come from the package's stated guarantees, not from observed output.
"""

import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from biteplan.config import config_from_dict
from biteplan.costs import CostWeights, RayGridConfig, pose_distance
from biteplan.errors import (InfeasibleGoalError, InvalidStartError,
                             NoTrajectoryError)
from biteplan.ftrt import (PidState, build_calibration_system, deadband_error,
                           pid_step, solve_calibration, synthetic_readings)
from biteplan.geom.foods import FOOD_KINDS, FoodSpec
from biteplan.geom.mesh import mesh_volume, slice_mesh_by_plane, transform_mesh
from biteplan.geom.mouth import MouthModel, ProjectionChecker
from biteplan.geom.pose import Pose, random_quat
from biteplan.plan import PlannerConfig, hbirrt_plan
from biteplan.runner import run_multibite, run_scenario, run_sweep
from biteplan.sample import SampleBudget, cluster_kmedoids, \
    sample_collision_free_goals
from biteplan.scenario import random_scenario
from tests.conftest import make_rng, random_convex_mesh, random_rigid_pose
from tests.test_kmedoids import _exhaustive_best, _scalar_distance_matrix
from tests.test_projection import _SceneOracle


def _verdict(name: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


# Lean planning knobs shared by the scenario-level gates. Small enough
# to keep hundreds of runs affordable, large enough that failures mean
# bugs rather than starved search.
_LEAN_PLANNER = {"max_iters": 1200, "smoothing_iters": 24}
_LEAN_SAMPLING = {"target_n": 32, "batch_size": 64, "max_batches": 60}
_LEAN_RAYS = {"grid_n": 10, "grid_m": 10}


def test_c01_tradeoff_between_comfort_and_efficiency():
    """Weight sweep: comfort spending and efficiency spending move in
    opposite directions across the grid, with both pure corners worst
    on the axis they ignore.

    Comfort per cell is the mean of the trajectories' comfort integral
    (sum of segment length times segment-mean comfort). A per-waypoint
    average would shrink as paths stretch through far, zero-penalty
    space and so reward exactly the deep insertions the comfort axis
    exists to punish; the integral is the quantity the planner trades.
    """
    cfg = config_from_dict({
        "planner": dict(_LEAN_PLANNER),
        "sampling": dict(_LEAN_SAMPLING),
        "comfort_rays": dict(_LEAN_RAYS),
        "run": {"seed": 0, "k_goals": 3},
        # narrow tilt cone: at desk scale a wide cone turns goal comfort
        # into an orientation lottery that drowns the depth signal
        "goal_distribution": {"cone_half_angle_deg": 10.0},
        "sweep": {"scenarios_per_cell": 50, "base_seed": 0,
                  "beta_c_grid": [0.0, 5.0, 15.0, 40.0]},
    })
    t0 = time.monotonic()
    _, summary = run_sweep(cfg, workers=1)
    elapsed = time.monotonic() - t0

    cells = summary["cells"]
    assert len(cells) == 16
    assert all(not c["empty_cell"] for c in cells)
    min_ok = min(c["n_success"] for c in cells)
    comfort = [c["mean_comfort_integral"] for c in cells]
    eff = [c["mean_efficiency"] for c in cells]
    rho = float(spearmanr(comfort, eff).statistic)

    corners = [(c["beta_E"], c["beta_C"]) for c in cells]
    i_e = corners.index((12.0, 0.0))   # pure efficiency
    i_c = corners.index((0.0, 40.0))   # pure comfort
    eff_corner_pays_comfort = all(
        comfort[i_e] > v for j, v in enumerate(comfort) if j != i_e)
    comfort_corner_pays_eff = all(
        eff[i_c] > v for j, v in enumerate(eff) if j != i_c)

    ok = (rho <= -0.5 and eff_corner_pays_comfort and comfort_corner_pays_eff
          and elapsed <= 900.0 and min_ok >= 45)
    _verdict(
        "criterion 01 comfort/efficiency trade-off", ok,
        f"spearman={rho:.3f} (need <= -0.5), "
        f"efficiency corner pays most comfort={eff_corner_pays_comfort}, "
        f"comfort corner pays most efficiency={comfort_corner_pays_eff}, "
        f"min cell successes={min_ok}/50, {elapsed:.0f}s of 900s")


def test_c02_every_returned_edge_survives_denser_recheck():
    """Every edge of every returned trajectory passes a fresh collision
    walk at twice the planner's checking density, endpoints included.
    Zero tolerance."""
    base = 7
    planner = PlannerConfig(**_LEAN_PLANNER)
    budget = SampleBudget(**_LEAN_SAMPLING)
    rays = RayGridConfig(**_LEAN_RAYS)
    weights = CostWeights()                      # combined, stock weights
    half_step = planner.edge_check_resolution / 2.0

    n_traj = 0
    n_edges = 0
    bad = 0
    for si in range(200):
        scenario = random_scenario(np.random.default_rng([base, 11, si]),
                                   food_segments=24)
        try:
            goals_all = sample_collision_free_goals(
                scenario, scenario.goal_distribution, budget,
                np.random.default_rng([base, 13, si]))
            km = cluster_kmedoids(goals_all, 3, w_rot=weights.w_rot)
            goals = [goals_all[i] for i in km.medoid_indices]
            result = hbirrt_plan(scenario, goals, weights, planner,
                                 np.random.default_rng([base, 19, si]), rays)
        except (InfeasibleGoalError, InvalidStartError, NoTrajectoryError):
            continue
        checker = ProjectionChecker(scenario.food, scenario.proxy,
                                    scenario.mouth)
        for traj in result.trajectories:
            if traj is None:
                continue
            n_traj += 1
            for a, b in zip(traj.waypoints[:-1], traj.waypoints[1:]):
                n_edges += 1
                d = pose_distance(a, b, weights.w_rot)
                steps = max(1, math.ceil(d / half_step))
                if not all(checker.is_free(a.interpolate(b, i / steps))
                           for i in range(steps + 1)):
                    bad += 1

    ok = bad == 0 and n_traj >= 300
    _verdict("criterion 02 edge soundness at half resolution", ok,
             f"{bad} bad edges of {n_edges} across {n_traj} trajectories "
             f"(need 0 bad, >= 300 trajectories)")


def test_c03_projection_check_agrees_with_containment_oracle():
    rng = make_rng(42)
    mouth = MouthModel()
    disagree = 0
    boundary_dist = []
    for kind in FOOD_KINDS:
        oracle = _SceneOracle(FoodSpec(kind, segments=16))
        checker = ProjectionChecker(oracle.food, oracle.proxy, mouth)
        for _ in range(1000):
            t = np.array([rng.uniform(-0.04, 0.04),
                          rng.uniform(-0.04, 0.04),
                          rng.uniform(-0.05, 0.10)])
            pose = Pose(t, random_quat(rng))
            if checker.is_free(pose) != oracle.is_free(pose, mouth):
                disagree += 1
                boundary_dist.append(oracle.boundary_distance(pose, mouth))
    agreement = 1.0 - disagree / 4000.0
    near = all(d <= 1e-4 for d in boundary_dist)
    ok = agreement >= 0.995 and near
    _verdict("criterion 03 projection check vs brute-force oracle", ok,
             f"agreement={agreement:.4%} over 4000 (need >= 99.5%), "
             f"disagreements within 1e-4 of boundary={near}")


def test_c04_calibration_recovers_parameters():
    """Noiseless draws recover mass and both biases to 1e-9; with 0.01
    sigma noise every parameter error lands inside its own 3-sigma band
    in at least 95 of 100 trials."""
    rng = make_rng(41)
    worst = 0.0
    for _ in range(100):
        mass = rng.uniform(0.01, 0.2)
        f_b = rng.normal(0.0, 0.5, 3)
        t_b = rng.normal(0.0, 0.05, 3)
        radius = rng.uniform(0.05, 0.15)
        s_rot = Pose((0, 0, 0), random_quat(rng)).rotation_matrix
        quats = [random_quat(rng) for _ in range(4)]
        res = solve_calibration(
            synthetic_readings(mass, f_b, t_b, quats, s_rot, radius),
            s_rot, radius)
        err = np.abs(np.array([res.mass - mass, *(res.force_bias - f_b),
                               *(res.torque_bias - t_b)]))
        worst = max(worst, float(err.max()))
    noiseless_ok = worst <= 1e-9

    rng = make_rng(0)
    sigma = 0.01
    hits = 0
    for _ in range(100):
        mass = rng.uniform(0.01, 0.2)
        f_b = rng.normal(0.0, 0.5, 3)
        t_b = rng.normal(0.0, 0.05, 3)
        radius = rng.uniform(0.05, 0.15)
        s_rot = Pose((0, 0, 0), random_quat(rng)).rotation_matrix
        quats = [random_quat(rng) for _ in range(4)]
        samples = synthetic_readings(mass, f_b, t_b, quats, s_rot, radius,
                                     noise_sigma=sigma, rng=rng)
        res = solve_calibration(samples, s_rot, radius)
        a, _ = build_calibration_system(samples, s_rot, radius)
        sig = np.sqrt(np.diag(sigma ** 2 * np.linalg.inv(a.T @ a)))
        est = np.array([res.mass, *res.force_bias, *res.torque_bias])
        true = np.array([mass, *f_b, *t_b])
        if np.all(np.abs(est - true) <= 3.0 * sig):
            hits += 1
    noisy_ok = hits >= 95

    ok = noiseless_ok and noisy_ok
    _verdict("criterion 04 wrench calibration recovery", ok,
             f"noiseless worst error={worst:.2e} (need <= 1e-9), "
             f"noisy all-parameter 3-sigma hits={hits}/100 (need >= 95)")


def test_c05_deadband_pid_closed_forms():
    th = 0.25
    inside = np.linspace(-th, th, 2001)
    zero_inside = bool(np.all(deadband_error(inside, th) == 0.0))

    # unit slope outside, continuous at the knots
    eps = np.array([1e-9, 1e-6, 1e-3])
    upper = np.abs(deadband_error(th + eps, th) - ((th + eps) - th)).max()
    lower = np.abs(deadband_error(-th - eps, th) - ((-th - eps) + th)).max()
    continuous = max(upper, lower) <= 1e-12

    # pure P: one tick is exactly kp * e
    e = np.array([0.4, -0.7, 1.3])
    v_p, _ = pid_step(PidState(kp=0.02, ki=0.0, kd=0.0), e)
    p_err = np.abs(v_p - 0.02 * e).max()

    # pure I: n constant-error ticks accumulate exactly ki * n * dt * e
    st = PidState(kp=0.0, ki=0.001, kd=0.0, dt=0.02, i_max=1e9)
    v_i = np.zeros(3)
    for _ in range(50):
        v_i, st = pid_step(st, e)
    i_err = np.abs(v_i - 0.001 * 50 * 0.02 * e).max()

    ok = (zero_inside and continuous and p_err <= 1e-12 and i_err <= 1e-12)
    _verdict("criterion 05 deadband PID exactness", ok,
             f"zero inside band={zero_inside}, knot continuity<=1e-12="
             f"{continuous}, pure-P err={p_err:.1e}, pure-I err={i_err:.1e}")


def test_c06_multibite_consumes_long_carrot():
    """A carrot 2.5x the mouth depth takes several bites and ends at
    least 95% eaten; one shorter than the mouth depth takes exactly one.

    The fit check runs with the efficiency cost alone and a denser goal
    set: whether one bite suffices is a question about how much fits,
    and the comfort terms would happily trade insertion depth away.
    """
    depth = MouthModel().depth_in
    base = {
        "planner": dict(_LEAN_PLANNER),
        "sampling": dict(_LEAN_SAMPLING),
        "comfort_rays": dict(_LEAN_RAYS),
    }
    t0 = time.monotonic()
    long_cfg = dict(base, weights={"mode": "combined"},
                    run={"seed": 0, "k_goals": 3},
                    food={"kind": "carrot",
                          "dimensions": {"radius": 0.006,
                                         "height": 2.5 * depth}})
    rep_long = run_multibite(config_from_dict(long_cfg))

    short_cfg = dict(base, weights={"mode": "efficiency"},
                     run={"seed": 0, "k_goals": 8},
                     food={"kind": "carrot",
                           "dimensions": {"radius": 0.006,
                                          "height": 0.05}})
    rep_short = run_multibite(config_from_dict(short_cfg))
    elapsed = time.monotonic() - t0

    ok = (rep_long["n_bites"] >= 2
          and rep_long["consumed_fraction"] >= 0.95
          and rep_short["n_bites"] == 1
          and elapsed <= 120.0)
    _verdict(
        "criterion 06 multi-bite consumption", ok,
        f"long carrot: {rep_long['n_bites']} bites (need >= 2), "
        f"{rep_long['consumed_fraction']:.1%} eaten (need >= 95%); "
        f"short carrot: {rep_short['n_bites']} bites (need exactly 1); "
        f"{elapsed:.0f}s of 120s")


def test_c07_mesh_volume_conservation():
    rng = make_rng(7)
    worst_split = 0.0
    for _ in range(500):
        mesh = random_convex_mesh(rng)
        v = mesh_volume(mesh)
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        point = rng.uniform(lo, hi)
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        front, back = slice_mesh_by_plane(mesh, point, normal)
        pieces = (front.volume if len(front.faces) else 0.0) + \
                 (back.volume if len(back.faces) else 0.0)
        worst_split = max(worst_split, abs(pieces - v) / v)
    split_ok = worst_split <= 1e-6

    worst_rigid = 0.0
    for _ in range(500):
        mesh = random_convex_mesh(rng)
        v = mesh_volume(mesh)
        moved = transform_mesh(mesh, random_rigid_pose(rng, 1.0))
        worst_rigid = max(worst_rigid, abs(mesh_volume(moved) - v) / v)
    rigid_ok = worst_rigid <= 1e-9

    ok = split_ok and rigid_ok
    _verdict("criterion 07 volume conservation", ok,
             f"worst split error={worst_split:.2e} (need <= 1e-6), "
             f"worst rigid-move error={worst_rigid:.2e} (need <= 1e-9), "
             "500 cases each")


def test_c08_kmedoids_near_exhaustive_optimum():
    rng = make_rng(21)
    worst_ratio = 1.0
    member_ok = True
    for _ in range(20):
        poses = [random_rigid_pose(rng, 0.3) for _ in range(12)]
        dist = _scalar_distance_matrix(poses)
        best_cost, _ = _exhaustive_best(dist, 3)
        res = cluster_kmedoids(poses, k=3)
        # scalar and batched metric evaluations agree to ~1e-8, so a
        # result can book-keep fractionally below the scalar optimum
        worst_ratio = max(worst_ratio,
                          (res.total_cost + 1e-7) / best_cost)
        med = set(res.medoid_indices.tolist())
        member_ok &= (len(med) == 3
                      and med <= set(range(12))
                      and set(res.assignments.tolist()) <= med)
    ok = worst_ratio <= 1.05 and member_ok
    _verdict("criterion 08 k-medoids optimality", ok,
             f"worst cost ratio={worst_ratio:.4f} (need <= 1.05), "
             f"medoid membership in all 20 runs={member_ok}")


def _canonical_json(path: Path) -> str:
    data = json.loads(path.read_text())
    data.pop("timings", None)
    return json.dumps(data, sort_keys=True)


def _cli(*args) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "biteplan.cli", *args],
                          capture_output=True, text=True)


def test_c09_cli_outputs_are_deterministic(tmp_path):
    """Three runs of each subcommand produce identical payloads once the
    wall-clock timing block is dropped (the sweep CSV has no timing
    fields and must match byte for byte)."""
    cfg = tmp_path / "scenario.toml"
    cfg.write_text(
        '[food]\nkind = "carrot"\nsegments = 24\n'
        '[planner]\nmax_iters = 1500\nsmoothing_iters = 30\n'
        '[sampling]\ntarget_n = 40\nbatch_size = 64\nmax_batches = 60\n'
        '[comfort_rays]\ngrid_n = 10\ngrid_m = 10\n'
        '[run]\nseed = 0\nk_goals = 3\n'
        '[sweep]\nbeta_e_grid = [0.0]\nbeta_c_grid = [10.0]\n'
        'scenarios_per_cell = 2\n')

    outcomes = {}
    for name, args, canon in [
        ("plan", ["plan", str(cfg)], _canonical_json),
        ("multibite", ["multibite", str(cfg)], _canonical_json),
        ("sweep", ["sweep", str(cfg)], lambda p: p.read_text()),
        ("calib", ["calib", "--noise-sigma", "0.01", "--seed", "3"],
         _canonical_json),
        ("validate-config", ["validate-config", str(cfg)], _canonical_json),
    ]:
        payloads = []
        for i in range(3):
            out = tmp_path / f"{name}.{i}.out"
            proc = _cli(*args, "--out", str(out))
            assert proc.returncode == 0, (name, proc.stderr)
            payloads.append(canon(out))
        outcomes[name] = payloads[0] == payloads[1] == payloads[2]

    ok = all(outcomes.values())
    _verdict("criterion 09 CLI determinism", ok,
             "3 identical runs for " + ", ".join(
                 f"{k}={'yes' if v else 'NO'}" for k, v in outcomes.items()))


def test_c10_combined_mode_lowers_path_comfort():
    """For each stock food, planning with the comfort terms active picks
    a goal that still gets food into the mouth and travels a path whose
    mean comfort penalty beats the efficiency-only plan for the same
    seed, in at least 8 of 10 trials."""
    base = {
        "planner": dict(_LEAN_PLANNER),
        "sampling": dict(_LEAN_SAMPLING),
        "comfort_rays": dict(_LEAN_RAYS),
    }
    wins = {}
    for kind in FOOD_KINDS:
        wins[kind] = 0
        for seed in range(10):
            reports = {}
            for mode in ("combined", "efficiency"):
                cfg = config_from_dict(dict(
                    base, food={"kind": kind},
                    weights={"mode": mode},
                    run={"seed": seed, "k_goals": 3}))
                try:
                    reports[mode] = run_scenario(cfg)
                except (InfeasibleGoalError, NoTrajectoryError):
                    reports[mode] = None
            if reports["combined"] is None or reports["efficiency"] is None:
                continue
            m_c = reports["combined"]["selected"]["metrics"]
            m_e = reports["efficiency"]["selected"]["metrics"]
            if (m_c["efficiency_at_goal"] < 1.0
                    and m_c["path_mean_comfort"] < m_e["path_mean_comfort"]):
                wins[kind] += 1

    ok = all(v >= 8 for v in wins.values())
    _verdict("criterion 10 combined beats efficiency on comfort", ok,
             "wins per food (need >= 8/10): " + ", ".join(
                 f"{k}={v}" for k, v in wins.items()))
