import json
import time

import numpy as np

from biteplan.config import (ScenarioConfig, SweepSpec, config_from_dict,
                             load_config)
from biteplan.costs import CostWeights
from biteplan.geom.raycast import RayGridConfig
from biteplan.plan import PlannerConfig
from biteplan.runner import (run_calibration_demo, run_multibite,
                             run_scenario, run_sweep)
from biteplan.sample import SampleBudget

# --- config parse smoke ---
toml_text = """
[run]
label = "smoke"
seed = 3
k_goals = 4

[food]
kind = "cantaloupe"
segments = 16

[start]
translation = [0.0, 0.0, 0.25]

[goal_distribution]
cone_half_angle_deg = 45.0

[weights]
mode = "combined"

[planner]
smoothing_iters = 30

[sampling]
target_n = 40
seed = 3

[comfort_rays]
grid_n = 10
grid_m = 10
"""
with open("/tmp/smoke.toml", "w") as f:
    f.write(toml_text)
cfg = load_config("/tmp/smoke.toml")
print("parsed:", cfg.label, cfg.seed, cfg.k_goals, cfg.food.kind,
      cfg.budget.target_n, cfg.rays.grid_n, cfg.planner.smoothing_iters)

# round-trip: to_dict -> config_from_dict -> to_dict must be identical
d1 = cfg.to_dict()
cfg2 = config_from_dict(json.loads(json.dumps(d1)), source="rt")
d2 = cfg2.to_dict()
assert d1 == d2, "round-trip mismatch"
print("round-trip OK")

# unknown-key rejection
try:
    config_from_dict({"food": {"kind": "carrot", "bogus": 1}}, source="x")
    raise SystemExit("should have raised")
except Exception as e:
    print("unknown key ->", type(e).__name__, str(e)[:80])

# --- run_scenario smoke ---
t0 = time.monotonic()
rep = run_scenario(cfg)
dt = time.monotonic() - t0
print(f"run_scenario: {dt:.2f}s goals={len(rep['goals'])} "
      f"selected_goal={rep['selected']['goal_index']} "
      f"cost={rep['selected']['metrics']['total_cost']:.4f}")
s1 = json.dumps({k: v for k, v in rep.items() if k != "timings"},
                sort_keys=True)
rep_b = run_scenario(cfg)
s2 = json.dumps({k: v for k, v in rep_b.items() if k != "timings"},
                sort_keys=True)
assert s1 == s2, "run_scenario not deterministic"
print("run_scenario deterministic OK, report bytes:", len(s1))

# --- tiny sweep smoke: 2x1 grid, 3 scenarios/cell ---
sweep_cfg = ScenarioConfig(
    weights=CostWeights(mode="combined"),
    planner=PlannerConfig(smoothing_iters=20, max_iters=1500),
    budget=SampleBudget(target_n=30, seed=0),
    rays=RayGridConfig(grid_n=10, grid_m=10),
    k_goals=3,
    sweep=SweepSpec(beta_e_grid=(0.0, 4.0), beta_c_grid=(10.0,),
                    scenarios_per_cell=3, base_seed=0),
)
t0 = time.monotonic()
csv1, summary = run_sweep(sweep_cfg)
dt = time.monotonic() - t0
print(f"sweep: {dt:.2f}s")
print(csv1)
csv2, _ = run_sweep(sweep_cfg)
assert csv1 == csv2, "sweep not deterministic"
print("sweep deterministic OK")
per_run = dt / (2 * 3)
print(f"per-scenario-cell cost: {per_run:.2f}s -> 16x50 est "
      f"{per_run * 800 / 60:.1f} min")

# --- multibite smoke (small sphere, one bite) ---
mb = run_multibite(cfg)
print("multibite:", mb["n_bites"], "bites, consumed",
      f"{mb['consumed_fraction']:.3f}", "partial:", mb["partial"])

# --- calibration demo ---
cal0 = run_calibration_demo(0.0, seed=1)
print("calib noiseless max err:", cal0["max_abs_error"])
assert cal0["max_abs_error"] <= 1e-9
cal1 = run_calibration_demo(0.01, seed=1)
print("calib sigma=0.01 max err:", f"{cal1['max_abs_error']:.5f}",
      "within 3sigma:", cal1["within_3_sigma"])
print("ALL RUNNER SMOKE OK")
