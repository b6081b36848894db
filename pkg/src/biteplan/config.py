"""Config parsing: TOML or JSON scenario descriptions with defaults.

Every section is optional; omitted fields take the documented defaults
so an empty file is a valid (carrot, straight ahead) scenario. Angles
in config files are degrees, since the files are the human surface;
everything internal is radians.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from .costs import CostWeights
from .errors import ConfigError, InvalidSpecError
from .geom.foods import FoodSpec
from .geom.mouth import MouthModel
from .geom.pose import Pose
from .geom.raycast import RayGridConfig
from .plan import PlannerConfig
from .sample import GoalDistribution, SampleBudget
from .scenario import Scenario

_SECTIONS = ("food", "start", "mouth", "goal_distribution", "weights",
             "planner", "sampling", "comfort_rays", "run", "multibite",
             "sweep")


@dataclass(frozen=True)
class MultibiteConfig:
    stop_fraction: float = 0.05
    max_bites: int = 10

    def __post_init__(self):
        if not (0.0 < self.stop_fraction <= 1.0):
            raise InvalidSpecError("stop_fraction must be in (0, 1]")
        if self.max_bites < 1:
            raise InvalidSpecError("max_bites must be positive")


@dataclass(frozen=True)
class SweepSpec:
    """Weight grids for the trade-off sweep.

    ``gamma_c_grid`` defaults to mirroring ``beta_c_grid`` (the tied
    sweep); pass it explicitly for a full 3-axis product.
    """

    beta_e_grid: tuple = (0.0, 1.0, 4.0, 12.0)
    beta_c_grid: tuple = (0.0, 2.0, 10.0, 30.0)
    gamma_c_grid: tuple | None = None
    scenarios_per_cell: int = 50
    base_seed: int = 0

    def __post_init__(self):
        if not self.beta_e_grid or not self.beta_c_grid:
            raise InvalidSpecError("sweep grids must be non-empty")
        if self.scenarios_per_cell < 1:
            raise InvalidSpecError("scenarios_per_cell must be >= 1")

    def cells(self) -> list[tuple[float, float, float]]:
        """(beta_E, beta_C, gamma_C) per cell, ordered by grid index."""
        out = []
        if self.gamma_c_grid is None:
            for be in self.beta_e_grid:
                for bc in self.beta_c_grid:
                    out.append((float(be), float(bc), float(bc)))
        else:
            for be in self.beta_e_grid:
                for bc in self.beta_c_grid:
                    for gc in self.gamma_c_grid:
                        out.append((float(be), float(bc), float(gc)))
        return out


# start the food a forearm's length in front of the face plane
_DEFAULT_START = Pose((0.0, 0.0, 0.25))


@dataclass
class ScenarioConfig:
    """Everything a run needs, with usable defaults baked in."""

    food: FoodSpec = field(default_factory=lambda: FoodSpec(kind="carrot"))
    food_scale: float = 1.0
    food_pose_on_fork: Pose = field(default_factory=Pose.identity)
    start: Pose = field(default_factory=lambda: _DEFAULT_START)
    mouth: MouthModel = field(default_factory=MouthModel)
    goal_distribution: GoalDistribution = field(
        default_factory=GoalDistribution)
    weights: CostWeights = field(default_factory=CostWeights)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    budget: SampleBudget = field(default_factory=SampleBudget)
    rays: RayGridConfig = field(default_factory=RayGridConfig)
    seed: int = 0
    k_goals: int = 15
    label: str = ""
    multibite: MultibiteConfig = field(default_factory=MultibiteConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def build_scenario(self) -> Scenario:
        spec = self.food if self.food_scale == 1.0 \
            else self.food.scaled(self.food_scale)
        return Scenario.build(spec, self.start, mouth=self.mouth,
                              food_pose_on_fork=self.food_pose_on_fork,
                              goal_distribution=self.goal_distribution,
                              label=self.label or spec.kind)

    def to_dict(self) -> dict:
        return {
            "food": {
                "kind": self.food.kind,
                "scale": self.food_scale,
                "segments": self.food.segments,
                "dimensions": dict(self.food.dimensions),
                "pose_on_fork": self.food_pose_on_fork.to_dict(),
            },
            "start": self.start.to_dict(),
            "mouth": {
                "pose": self.mouth.pose.to_dict(),
                "radii": list(self.mouth.radii),
                "depth_in": self.mouth.depth_in,
            },
            "goal_distribution": {
                "cone_half_angle": self.goal_distribution.cone_half_angle,
                "spin_range": list(self.goal_distribution.spin_range),
                "offset_bounds": [list(b) for b in
                                  self.goal_distribution.offset_bounds],
            },
            "weights": {k: getattr(self.weights, k) for k in (
                "mode", "w_rot", "alpha", "r_side", "r_up", "r_down",
                "beta_E", "beta_C", "gamma_C")},
            "planner": {k: getattr(self.planner, k) for k in (
                "step_eps", "knn_k", "max_iters", "edge_check_resolution",
                "goal_connect_radius", "smoothing_iters", "m_floor",
                "tau_scale", "sample_margin", "straight_line_first",
                "max_connect_steps")},
            "sampling": {k: getattr(self.budget, k) for k in (
                "target_n", "batch_size", "timeout_s", "seed",
                "max_batches")},
            "comfort_rays": {k: getattr(self.rays, k) for k in (
                "grid_n", "grid_m", "extent", "z_max")},
            "run": {"seed": self.seed, "k_goals": self.k_goals,
                    "label": self.label},
            "multibite": {"stop_fraction": self.multibite.stop_fraction,
                          "max_bites": self.multibite.max_bites},
            "sweep": {
                "beta_e_grid": list(self.sweep.beta_e_grid),
                "beta_c_grid": list(self.sweep.beta_c_grid),
                "gamma_c_grid": list(self.sweep.gamma_c_grid)
                if self.sweep.gamma_c_grid is not None else None,
                "scenarios_per_cell": self.sweep.scenarios_per_cell,
                "base_seed": self.sweep.base_seed,
            },
        }


def _need(table: dict, allowed: set[str], where: str):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", location=where)


def _pose_from(table: dict, where: str) -> Pose:
    _need(table, {"translation", "quaternion"}, where)
    try:
        return Pose(table.get("translation", (0.0, 0.0, 0.0)),
                    table.get("quaternion", (1.0, 0.0, 0.0, 0.0)))
    except Exception as err:
        raise ConfigError(str(err), location=where) from err


def _build(cls, table: dict, where: str, **extra):
    try:
        return cls(**table, **extra)
    except TypeError as err:
        raise ConfigError(str(err), location=where) from err
    except InvalidSpecError as err:
        raise ConfigError(str(err), location=where) from err


def config_from_dict(raw: dict, source: str = "<dict>") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a table/object", location=source)
    _need(raw, set(_SECTIONS), source)
    cfg = ScenarioConfig()

    food_t = dict(raw.get("food", {}))
    _need(food_t, {"kind", "scale", "segments", "dimensions",
                   "pose_on_fork"}, "food")
    pose_on_fork = _pose_from(dict(food_t.pop("pose_on_fork", {})),
                              "food.pose_on_fork")
    scale = float(food_t.pop("scale", 1.0))
    spec = _build(FoodSpec, {
        "kind": food_t.get("kind", "carrot"),
        "dimensions": dict(food_t.get("dimensions", {})),
        "segments": int(food_t.get("segments", 32)),
    }, "food")

    start = _pose_from(dict(raw["start"]), "start") if "start" in raw \
        else _DEFAULT_START

    mouth_t = dict(raw.get("mouth", {}))
    _need(mouth_t, {"pose", "radii", "depth_in"}, "mouth")
    mouth = _build(MouthModel, {
        "pose": _pose_from(dict(mouth_t.get("pose", {})), "mouth.pose"),
        "radii": tuple(mouth_t.get("radii", (0.032, 0.026))),
        "depth_in": float(mouth_t.get("depth_in", 0.06)),
    }, "mouth")

    dist_t = dict(raw.get("goal_distribution", {}))
    _need(dist_t, {"cone_half_angle", "cone_half_angle_deg", "spin_range",
                   "spin_range_deg", "offset_bounds"}, "goal_distribution")
    dist_kwargs = {}
    # radians are canonical; the *_deg spellings are for hand-written files
    if "cone_half_angle" in dist_t and "cone_half_angle_deg" in dist_t:
        raise ConfigError("give cone_half_angle or cone_half_angle_deg, "
                          "not both", location="goal_distribution")
    if "cone_half_angle" in dist_t:
        dist_kwargs["cone_half_angle"] = float(dist_t["cone_half_angle"])
    elif "cone_half_angle_deg" in dist_t:
        dist_kwargs["cone_half_angle"] = float(
            np.deg2rad(dist_t["cone_half_angle_deg"]))
    if "spin_range" in dist_t and "spin_range_deg" in dist_t:
        raise ConfigError("give spin_range or spin_range_deg, not both",
                          location="goal_distribution")
    if "spin_range" in dist_t:
        lo, hi = dist_t["spin_range"]
        dist_kwargs["spin_range"] = (float(lo), float(hi))
    elif "spin_range_deg" in dist_t:
        lo, hi = dist_t["spin_range_deg"]
        dist_kwargs["spin_range"] = (float(np.deg2rad(lo)),
                                     float(np.deg2rad(hi)))
    if "offset_bounds" in dist_t:
        dist_kwargs["offset_bounds"] = tuple(
            tuple(float(v) for v in b) for b in dist_t["offset_bounds"])
    dist = _build(GoalDistribution, dist_kwargs, "goal_distribution")

    weights = _build(CostWeights, dict(raw.get("weights", {})), "weights")
    planner = _build(PlannerConfig, dict(raw.get("planner", {})), "planner")
    budget = _build(SampleBudget, dict(raw.get("sampling", {})), "sampling")
    rays = _build(RayGridConfig, dict(raw.get("comfort_rays", {})),
                  "comfort_rays")

    run_t = dict(raw.get("run", {}))
    _need(run_t, {"seed", "k_goals", "label"}, "run")
    mb = _build(MultibiteConfig, dict(raw.get("multibite", {})), "multibite")

    sweep_t = dict(raw.get("sweep", {}))
    _need(sweep_t, {"beta_e_grid", "beta_c_grid", "gamma_c_grid",
                    "scenarios_per_cell", "base_seed"}, "sweep")
    sweep_kwargs = {}
    for key in ("beta_e_grid", "beta_c_grid", "gamma_c_grid"):
        if key in sweep_t and sweep_t[key] is not None:
            sweep_kwargs[key] = tuple(float(v) for v in sweep_t[key])
    for key in ("scenarios_per_cell", "base_seed"):
        if key in sweep_t:
            sweep_kwargs[key] = int(sweep_t[key])
    sweep = _build(SweepSpec, sweep_kwargs, "sweep")

    cfg = ScenarioConfig(
        food=spec, food_scale=scale, food_pose_on_fork=pose_on_fork,
        start=start, mouth=mouth, goal_distribution=dist, weights=weights,
        planner=planner, budget=budget, rays=rays,
        seed=int(run_t.get("seed", 0)),
        k_goals=int(run_t.get("k_goals", 15)),
        label=str(run_t.get("label", "")),
        multibite=mb, sweep=sweep)
    if cfg.k_goals < 1:
        raise ConfigError("k_goals must be >= 1", location="run.k_goals")
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse a .toml or .json scenario file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON: {err}",
                              location=str(path)) from err
    else:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"invalid TOML: {err}",
                              location=str(path)) from err
    return config_from_dict(raw, source=str(path))
