"""Bite simulation and the greedy multi-bite feeding loop.

A bite removes whatever part of the posed food sits inside the mouth
slab (between the face plane and the insertion depth). The multi-bite
loop alternates plan -> bite -> re-plan on the remaining mesh until the
food is gone or no feasible goal remains.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .costs import CostWeights
from .errors import InfeasibleGoalError, InvalidSpecError, NoTrajectoryError
from .geom.mesh import TriMesh, concatenate_meshes, transform_mesh
from .geom.mesh import slice_mesh_by_plane
from .geom.mouth import MouthModel
from .geom.pose import Pose
from .geom.raycast import RayGridConfig
from .plan import PlannerConfig, PlanResult, Trajectory, hbirrt_plan, \
    select_trajectory
from .sample import SampleBudget, cluster_kmedoids, sample_collision_free_goals
from .scenario import Scenario


@dataclass
class BiteResult:
    """Volume bookkeeping for one bite."""

    consumed_volume: float
    remaining: TriMesh | None
    bite_index: int

    @property
    def remaining_volume(self) -> float:
        return self.remaining.volume if self.remaining is not None else 0.0


def simulate_bite(food: TriMesh, goal: Pose, mouth: MouthModel,
                  bite_index: int = 0) -> BiteResult:
    """Slice the posed food at the face plane and eat the slab part.

    Consumed is the portion with mouth-frame z in [-depth_in, 0];
    anything deeper than the slab stays with the remainder. The
    remainder is returned in the food's own frame (``None`` when
    nothing is left).
    """
    posed = transform_mesh(food, goal)
    face_point = mouth.pose.apply((0.0, 0.0, 0.0))
    face_normal = np.asarray(mouth.pose.rotate((0.0, 0.0, 1.0)))
    behind, outside = slice_mesh_by_plane(posed, face_point, face_normal)
    if not len(behind.faces):
        return BiteResult(0.0, food, bite_index)
    deep_point = mouth.pose.apply((0.0, 0.0, -mouth.depth_in))
    slab, below = slice_mesh_by_plane(behind, deep_point, -face_normal)
    consumed = slab.volume
    parts = [m for m in (outside, below) if len(m.faces)]
    if not parts:
        return BiteResult(consumed, None, bite_index)
    remaining_world = concatenate_meshes(parts) if len(parts) > 1 else parts[0]
    remaining = transform_mesh(remaining_world, goal.inverse())
    return BiteResult(consumed, remaining, bite_index)


@dataclass
class BiteStep:
    """One iteration of the multi-bite loop."""

    trajectory: Trajectory
    bite: BiteResult
    plan_result: PlanResult
    goal: Pose


@dataclass
class MultibiteOutcome:
    steps: list
    initial_volume: float
    consumed_total: float
    partial: bool
    partial_reason: str = ""

    @property
    def consumed_fraction(self) -> float:
        return self.consumed_total / self.initial_volume \
            if self.initial_volume > 0.0 else 0.0


def _recentered(mesh: TriMesh) -> tuple[TriMesh, np.ndarray]:
    """Shift a mesh so its centroid sits at the origin.

    The fork keeps its skewer point; without re-perception we
    approximate re-seating by re-anchoring the centroid.
    """
    c = mesh.centroid
    return TriMesh(mesh.vertices - c, mesh.faces), c


def plan_single_bite(scenario: Scenario, weights: CostWeights,
                     planner_cfg: PlannerConfig, budget: SampleBudget,
                     k_goals: int, rng: np.random.Generator,
                     ray_config: RayGridConfig | None = None
                     ) -> tuple[Trajectory, PlanResult, list[Pose]]:
    """Sample goals, cluster to k medoids, plan, select.

    This is the whole single-bite pipeline; the multi-bite loop calls
    it once per iteration so both paths behave identically for the
    same mesh and generator state.
    """
    goals_all = sample_collision_free_goals(
        scenario, scenario.goal_distribution, budget, rng)
    km = cluster_kmedoids(goals_all, k_goals, w_rot=weights.w_rot)
    goals = [goals_all[i] for i in km.medoid_indices]
    result = hbirrt_plan(scenario, goals, weights, planner_cfg, rng,
                         ray_config)
    best = result.best()
    return best, result, goals


def multibite_plan(scenario: Scenario, weights: CostWeights,
                   planner_cfg: PlannerConfig, budget: SampleBudget,
                   k_goals: int = 15, stop_fraction: float = 0.05,
                   seed: int = 0, max_bites: int = 10,
                   ray_config: RayGridConfig | None = None
                   ) -> MultibiteOutcome:
    """Greedy plan -> bite -> re-plan until the food is consumed.

    Stops when the remaining fraction drops below ``stop_fraction``,
    when the hard bite cap is hit, or when a bite stops making
    progress. A bite consuming under 1% of the current volume is
    retried once with the efficiency weight doubled; a second failure
    ends the session with ``partial`` set. An infeasible first bite
    propagates; later infeasibility ends the session as partial.
    """
    if not (0.0 < stop_fraction <= 1.0):
        raise InvalidSpecError("stop_fraction must be in (0, 1]")
    initial_volume = scenario.food.volume
    steps: list[BiteStep] = []
    consumed_total = 0.0
    if stop_fraction >= 1.0:
        # remaining/initial < 1 is already satisfiable only by eating;
        # a threshold of 1 means "already done"
        return MultibiteOutcome(steps, initial_volume, 0.0, partial=False)
    current = scenario
    for bite_index in range(max_bites):
        volume = current.food.volume
        if volume / initial_volume < stop_fraction:
            break
        rng = np.random.default_rng([seed, bite_index])
        try:
            best, result, _ = plan_single_bite(
                current, weights, planner_cfg, budget, k_goals, rng,
                ray_config)
        except (InfeasibleGoalError, NoTrajectoryError) as err:
            if bite_index == 0:
                raise
            return MultibiteOutcome(steps, initial_volume, consumed_total,
                                    partial=True, partial_reason=str(err))
        goal = best.waypoints[-1]
        bite = simulate_bite(current.food, goal, current.mouth, bite_index)
        if bite.consumed_volume < 0.01 * volume:
            # nibble guard: push insertion harder once, then give up
            rng = np.random.default_rng([seed, bite_index])
            hungrier = replace(weights, beta_E=max(1.0, weights.beta_E) * 2.0)
            try:
                best, result, _ = plan_single_bite(
                    current, hungrier, planner_cfg, budget, k_goals, rng,
                    ray_config)
            except (InfeasibleGoalError, NoTrajectoryError) as err:
                return MultibiteOutcome(steps, initial_volume, consumed_total,
                                        partial=True, partial_reason=str(err))
            goal = best.waypoints[-1]
            bite = simulate_bite(current.food, goal, current.mouth,
                                 bite_index)
            if bite.consumed_volume < 0.01 * volume:
                return MultibiteOutcome(
                    steps, initial_volume, consumed_total, partial=True,
                    partial_reason="no bite progress after retry")
        consumed_total += bite.consumed_volume
        steps.append(BiteStep(trajectory=best, bite=bite, plan_result=result,
                              goal=goal))
        if bite.remaining is None or bite.remaining.volume <= 0.0:
            break
        next_food, _ = _recentered(bite.remaining)
        current = replace(current, food=next_food)
        if next_food.volume / initial_volume < stop_fraction:
            break
    return MultibiteOutcome(steps, initial_volume, consumed_total,
                            partial=False)
