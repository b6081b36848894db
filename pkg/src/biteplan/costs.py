"""Cost model over food poses: distance metric, efficiency, comfort.

Four cost modes share one edge/heuristic interface:

- ``distance``: pure pose-space length.
- ``efficiency``: distance edges plus a goal term that rewards getting
  food volume behind the face plane.
- ``comfort``: edges inflated by personal-space intrusion at the edge
  midpoint, plus the same intrusion measured at the goal.
- ``combined``: comfort edges plus both goal terms.

Goal terms depend only on the goal pose, so callers evaluate them once
per goal (see :meth:`SceneCosts.goal_terms`) and reuse them in every
heuristic evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidSpecError
from .geom.mesh import TriMesh, slice_mesh_by_plane
from .geom.mouth import MouthModel, ProjectionChecker, RobotProxy
from .geom.pose import Pose
from .geom.raycast import GridRaycaster, RayGridConfig

COST_MODES = ("distance", "efficiency", "comfort", "combined")

# hits at or behind the face plane are treated as 5 mm in front of it to
# keep the intrusion cost finite
_Z_FLOOR = 0.005


@dataclass(frozen=True)
class CostWeights:
    """Weights of the trajectory cost model.

    ``w_rot`` (m/rad) converts rotation angle into translation-equivalent
    length. ``alpha`` scales the intrusion falloff; ``r_side``, ``r_up``,
    ``r_down`` weigh sideways and vertical offsets (above/below the mouth
    axis). ``beta_E``/``beta_C`` weigh the goal efficiency and comfort
    terms; ``gamma_C`` inflates edges by midpoint comfort.
    """

    mode: str = "combined"
    w_rot: float = 0.1
    alpha: float = 1.0
    r_side: float = 1.0
    r_up: float = 1.5
    r_down: float = 1.0
    beta_E: float = 1.0
    beta_C: float = 10.0
    gamma_C: float = 10.0

    def __post_init__(self):
        if self.mode not in COST_MODES:
            raise InvalidSpecError(
                f"unknown cost mode {self.mode!r}; expected one of {COST_MODES}")
        if self.w_rot <= 0.0:
            raise InvalidSpecError("w_rot must be positive")
        for name in ("alpha", "r_side", "r_up", "r_down",
                     "beta_E", "beta_C", "gamma_C"):
            if getattr(self, name) < 0.0:
                raise InvalidSpecError(f"{name} must be non-negative")

    def with_mode(self, mode: str) -> "CostWeights":
        return replace(self, mode=mode)


# -- pose-space metric ---------------------------------------------------

def pose_distance(a: Pose, b: Pose, w_rot: float = 0.1) -> float:
    """Length of the geodesic between two poses.

    Euclidean translation distance combined with the rotation geodesic
    angle scaled by ``w_rot``, root-sum-squared. This is a proper metric
    and is exactly additive along :meth:`Pose.interpolate` paths.
    """
    dt = a.translation - b.translation
    theta = a.rotation_angle_to(b)
    return float(np.sqrt(dt @ dt + (w_rot * theta) ** 2))


def pairwise_pose_distance(translations: np.ndarray, quats: np.ndarray,
                           w_rot: float = 0.1) -> np.ndarray:
    """Full distance matrix for stacked poses, shape (n, n)."""
    dt = translations[:, None, :] - translations[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", dt, dt)
    dot = np.abs(quats @ quats.T)
    theta = 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))
    return np.sqrt(d2 + (w_rot * theta) ** 2)


def pose_midpoint(a: Pose, b: Pose) -> Pose:
    return a.interpolate(b, 0.5)


# -- individual cost terms ------------------------------------------------

def cost_comfort_spatial(offset, z: float, weights: CostWeights) -> float:
    """Personal-space intrusion of a single point near the face.

    ``offset`` is the (side, vertical) offset in the face plane and ``z``
    the distance in front of it; intrusion grows as points move off-axis
    or close to the face and saturates at 1.
    """
    x, y = float(offset[0]), float(offset[1])
    return float(_spatial_cost_batch(np.array([[x, y]]),
                                     np.array([float(z)]), weights)[0])


def _spatial_cost_batch(xy: np.ndarray, z: np.ndarray,
                        weights: CostWeights) -> np.ndarray:
    z = np.where(z <= 0.0, _Z_FLOOR, z)
    r_vert = np.where(xy[:, 1] > 0.0, weights.r_up, weights.r_down)
    quad = weights.r_side * xy[:, 0] ** 2 + r_vert * xy[:, 1] ** 2
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 - np.exp(-weights.alpha * quad / (z * z))


def cost_efficiency(food: TriMesh, pose: Pose, mouth: MouthModel) -> float:
    """How much of the food still has to travel: 0 when the whole volume
    sits inside the mouth slab, 1 when none of it does, following a
    cube-root volume ratio in between."""
    vol = food.volume
    if vol <= 0.0:
        raise InvalidSpecError("food mesh must enclose positive volume")
    local = mouth.world_to_mouth(pose)
    posed = TriMesh(local.apply(food.vertices), food.faces)
    behind, _ = slice_mesh_by_plane(posed, (0.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    if not len(behind.faces):
        return 1.0
    slab, _ = slice_mesh_by_plane(behind, (0.0, 0.0, -mouth.depth_in),
                                  (0.0, 0.0, -1.0))
    ratio = min(max(slab.volume / vol, 0.0), 1.0)
    return 1.0 - ratio ** (1.0 / 3.0)


def cost_comfort_pose(food: TriMesh, proxy: RobotProxy, pose: Pose,
                      mouth: MouthModel, weights: CostWeights,
                      ray_config: RayGridConfig | None = None) -> float:
    """Grid-averaged intrusion of the whole scene at one food pose.

    Rays that miss contribute zero, so the average runs over all rays.
    """
    return SceneCosts(food, proxy, mouth, weights,
                      ray_config or RayGridConfig()).comfort(pose)


# -- scene-bound evaluator -------------------------------------------------

class SceneCosts:
    """Cost evaluator bound to one scene (food + proxy + mouth).

    Precomputes the triangle stack and mouth transform once; all public
    methods are pure functions of the pose arguments.
    """

    def __init__(self, food: TriMesh, proxy: RobotProxy, mouth: MouthModel,
                 weights: CostWeights, ray_config: RayGridConfig | None = None):
        self.food = food
        self.proxy = proxy
        self.mouth = mouth
        self.weights = weights
        self.ray_config = ray_config or RayGridConfig()
        # a 1x1 grid is fine for raw raycasting but not as a comfort average
        if self.ray_config.grid_n * self.ray_config.grid_m < 4:
            raise InvalidSpecError("comfort ray grid needs at least 4 rays")
        self.checker = ProjectionChecker(food, proxy, mouth)
        self.caster = GridRaycaster(mouth, self.ray_config)
        tris = [food.triangles.reshape(-1, 3)]
        for body in proxy.bodies:
            tris.append(body.offset.apply(
                body.mesh.triangles.reshape(-1, 3)))
        self._tris = np.vstack(tris)          # (3t, 3) in the food frame
        inv = mouth.pose.inverse()
        self._rot = inv.rotation_matrix
        self._off = inv.translation
        self._n_rays = self.ray_config.grid_n * self.ray_config.grid_m

    # geometry plumbing

    def is_free(self, pose: Pose) -> bool:
        return self.checker.is_free(pose)

    def _local_triangles(self, pose: Pose) -> np.ndarray:
        m = self._rot @ pose.rotation_matrix
        c = self._rot @ pose.translation + self._off
        return (self._tris @ m.T + c).reshape(-1, 3, 3)

    # cost terms

    def comfort(self, pose: Pose) -> float:
        hit, pts = self.caster.cast_local(self._local_triangles(pose))
        if not hit.any():
            return 0.0
        costs = _spatial_cost_batch(pts[hit, :2], pts[hit, 2], self.weights)
        return float(costs.sum() / self._n_rays)

    def efficiency(self, pose: Pose) -> float:
        return cost_efficiency(self.food, pose, self.mouth)

    def goal_terms(self, goal: Pose) -> tuple[float, float]:
        """(efficiency, comfort) at a goal pose; compute once per goal."""
        w = self.weights
        eff = self.efficiency(goal) if w.mode in ("efficiency", "combined") \
            else 0.0
        comf = self.comfort(goal) if w.mode in ("comfort", "combined") \
            else 0.0
        return eff, comf

    # planner-facing costs

    def edge_cost(self, a: Pose, b: Pose) -> float:
        w = self.weights
        d = pose_distance(a, b, w.w_rot)
        if w.mode in ("comfort", "combined") and d > 0.0:
            d *= 1.0 + w.gamma_C * self.comfort(pose_midpoint(a, b))
        return d

    def heuristic(self, p: Pose, goal: Pose,
                  goal_terms: tuple[float, float] | None = None) -> float:
        w = self.weights
        h = pose_distance(p, goal, w.w_rot)
        if w.mode == "distance":
            return h
        eff, comf = goal_terms if goal_terms is not None \
            else self.goal_terms(goal)
        if w.mode in ("efficiency", "combined"):
            h += w.beta_E * eff
        if w.mode in ("comfort", "combined"):
            h += w.beta_C * comf
        return h


def edge_cost(a: Pose, b: Pose, food: TriMesh, proxy: RobotProxy,
              mouth: MouthModel, weights: CostWeights,
              ray_config: RayGridConfig | None = None) -> float:
    """One-shot edge cost; build :class:`SceneCosts` for repeated use."""
    return SceneCosts(food, proxy, mouth, weights, ray_config).edge_cost(a, b)


def heuristic_cost(p: Pose, goal: Pose, food: TriMesh, proxy: RobotProxy,
                   mouth: MouthModel, weights: CostWeights,
                   ray_config: RayGridConfig | None = None) -> float:
    """One-shot heuristic (distance plus mode-dependent goal terms)."""
    return SceneCosts(food, proxy, mouth, weights, ray_config).heuristic(p, goal)
