"""Scenario assembly: food on fork, mouth, start pose, goal support."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError
from .geom.foods import FOOD_KINDS, FoodSpec, make_food_mesh
from .geom.mesh import TriMesh
from .geom.mouth import MouthModel, RobotProxy
from .geom.pose import Pose, quat_from_axis_angle
from .sample import CANONICAL_GOAL_QUAT, GoalDistribution


@dataclass(frozen=True)
class Scenario:
    """Everything a planning run needs besides weights and seeds.

    ``start`` is the world pose of the food frame at the beginning of
    the transfer; ``food_pose_on_fork`` records how the food sits on the
    utensil (the proxy bodies already bake it into their offsets).
    """

    food: TriMesh
    proxy: RobotProxy
    mouth: MouthModel
    start: Pose
    goal_distribution: GoalDistribution = field(default_factory=GoalDistribution)
    food_pose_on_fork: Pose = field(default_factory=Pose.identity)
    label: str = ""

    def __post_init__(self):
        if self.food.volume <= 0.0:
            raise InvalidSpecError("scenario food mesh must enclose volume")

    @staticmethod
    def build(spec: FoodSpec, start: Pose,
              mouth: MouthModel | None = None,
              food_pose_on_fork: Pose | None = None,
              goal_distribution: GoalDistribution | None = None,
              label: str = "") -> "Scenario":
        """Assemble a scenario from a food spec and a start pose."""
        mouth = mouth if mouth is not None else MouthModel()
        p_f = food_pose_on_fork if food_pose_on_fork is not None else Pose.identity()
        dist = goal_distribution if goal_distribution is not None else GoalDistribution()
        food = make_food_mesh(spec)
        proxy = RobotProxy.default(p_f)
        return Scenario(food=food, proxy=proxy, mouth=mouth, start=start,
                        goal_distribution=dist, food_pose_on_fork=p_f,
                        label=label or spec.kind)


def _random_tilt(rng: np.random.Generator, max_angle: float) -> np.ndarray:
    axis = rng.normal(size=3)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        axis, norm = np.array([1.0, 0.0, 0.0]), 1.0
    return quat_from_axis_angle(axis / norm, rng.uniform(0.0, max_angle))


def random_scenario(seed: int | np.random.Generator,
                    food_segments: int = 24,
                    mouth: MouthModel | None = None,
                    goal_distribution: GoalDistribution | None = None) -> Scenario:
    """Generate a randomized but well-posed scenario.

    Food kind and size, the food's seating on the fork, and the start
    pose all vary; the start stays in front of the face (z well above
    the mouth plane) so it is collision-free by construction. Equal
    seeds give equal scenarios.
    """
    rng = seed if isinstance(seed, np.random.Generator) else \
        np.random.default_rng(seed)
    kind = FOOD_KINDS[int(rng.integers(len(FOOD_KINDS)))]
    scale = float(rng.uniform(0.75, 1.25))
    spec = FoodSpec(kind=kind, segments=food_segments).scaled(scale)

    seat_tilt = _random_tilt(rng, np.deg2rad(25.0))
    seat_shift = rng.uniform(-0.004, 0.004, size=3)
    p_f = Pose(seat_shift, seat_tilt)

    # randomness lives in the food and its seating on the fork; the
    # robot itself waits in the standard ready orientation, facing the
    # mouth, at a varying lateral standoff
    start_t = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                        rng.uniform(0.20, 0.30)])
    start = Pose(start_t, CANONICAL_GOAL_QUAT)

    return Scenario.build(spec, start, mouth=mouth, food_pose_on_fork=p_f,
                          goal_distribution=goal_distribution,
                          label=f"{kind}-{scale:.2f}")
