"""Goal pose sampling and medoid clustering.

Goal poses live near the mouth: the food's +y axis points into the
mouth within a cone around the inward axis, spin about the food axis is
free, and the food origin sits inside a small mouth-frame offset box.
Candidates are drawn in batches, filtered by the projection collision
check, and thinned to k representative poses with PAM k-medoids.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .costs import pairwise_pose_distance
from .errors import InfeasibleGoalError, InvalidSpecError
from .geom.mouth import ProjectionChecker
from .geom.pose import (Pose, quat_from_axis_angle, quat_from_two_vectors,
                        quat_multiply)

if TYPE_CHECKING:
    from .scenario import Scenario

# canonical goal orientation: food +y onto the inward mouth axis (-z),
# food +z up
CANONICAL_GOAL_QUAT = quat_from_two_vectors((0.0, 1.0, 0.0), (0.0, 0.0, -1.0))
_INWARD = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class GoalDistribution:
    """Support of valid feeding poses relative to the mouth.

    ``cone_half_angle`` bounds the tilt of the food axis away from the
    inward mouth axis; ``spin_range`` bounds the roll about the food
    axis; ``offset_bounds`` is ((x_lo, x_hi), (y_lo, y_hi), (z_lo, z_hi))
    for the food origin in the mouth frame, negative z reaching into the
    mouth.
    """

    cone_half_angle: float = np.deg2rad(45.0)
    spin_range: tuple[float, float] = (-np.pi, np.pi)
    offset_bounds: tuple[tuple[float, float], ...] = (
        (-0.02, 0.02), (-0.02, 0.02), (-0.04, 0.01))

    def __post_init__(self):
        if not (0.0 < self.cone_half_angle <= np.pi / 2.0):
            raise InvalidSpecError("cone_half_angle must be in (0, pi/2]")
        if self.spin_range[0] > self.spin_range[1]:
            raise InvalidSpecError("spin_range must be ordered")
        if len(self.offset_bounds) != 3 or any(
                lo > hi for lo, hi in self.offset_bounds):
            raise InvalidSpecError("offset_bounds must be 3 ordered pairs")

    def lows_highs(self) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(self.offset_bounds, dtype=np.float64)
        return b[:, 0], b[:, 1]


@dataclass(frozen=True)
class SampleBudget:
    """Stopping rules for rejection sampling.

    ``max_batches`` is the deterministic cap; the wall-clock ``timeout_s``
    is a secondary guard that only matters on pathologically slow scenes.
    ``seed`` drives sampling when no generator is passed explicitly.
    """

    target_n: int = 150
    batch_size: int = 64
    timeout_s: float = 10.0
    seed: int = 0
    max_batches: int = 400

    def __post_init__(self):
        if self.target_n < 1 or self.batch_size < 1 or self.max_batches < 1:
            raise InvalidSpecError("sample budget fields must be positive")
        if self.timeout_s <= 0.0:
            raise InvalidSpecError("timeout_s must be positive")


def _orientation_from_draws(dist: GoalDistribution, u: float, phi: float,
                            psi: float) -> np.ndarray:
    """Compose spin, canonical alignment, and cone tilt.

    ``u`` picks the tilt via inverse-CDF on cos(angle), which is uniform
    over the spherical cap's area; ``phi`` is the tilt azimuth and
    ``psi`` the spin about the food axis.
    """
    cos_t = 1.0 - u * (1.0 - np.cos(dist.cone_half_angle))
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    axis_dir = np.array([sin_t * np.cos(phi), sin_t * np.sin(phi), -cos_t])
    q_spin = quat_from_axis_angle((0.0, 1.0, 0.0), psi)
    q_tilt = quat_from_two_vectors(_INWARD, axis_dir)
    return quat_multiply(q_tilt, quat_multiply(CANONICAL_GOAL_QUAT, q_spin))


def sample_goal(dist: GoalDistribution, rng: np.random.Generator,
                mouth_pose: Pose | None = None) -> Pose:
    """Draw one pose from the goal distribution.

    Returned in the mouth frame, or in the world frame when
    ``mouth_pose`` is given. Draw order (tilt, azimuth, spin, offsets) is
    fixed, so equal seeds give equal poses.
    """
    u, phi_u, psi_u = rng.random(3)
    phi = 2.0 * np.pi * phi_u
    psi = dist.spin_range[0] + psi_u * (dist.spin_range[1] - dist.spin_range[0])
    lo, hi = dist.lows_highs()
    t = rng.uniform(lo, hi)
    local = Pose(t, _orientation_from_draws(dist, u, phi, psi))
    return mouth_pose.compose(local) if mouth_pose is not None else local


def goal_in_support(dist: GoalDistribution, local_pose: Pose,
                    tol: float = 1e-9) -> bool:
    """Check a mouth-frame pose against the distribution's support."""
    axis = local_pose.rotate((0.0, 1.0, 0.0))
    cos_t = float(np.clip(np.dot(axis, _INWARD), -1.0, 1.0))
    if np.arccos(cos_t) > dist.cone_half_angle + tol:
        return False
    lo, hi = dist.lows_highs()
    t = local_pose.translation
    if (t < lo - tol).any() or (t > hi + tol).any():
        return False
    lo_s, hi_s = dist.spin_range
    if hi_s - lo_s >= 2.0 * np.pi - tol:
        return True
    # undo tilt and alignment; what remains must be a pure y-spin
    q_tilt = quat_from_two_vectors(_INWARD, axis)
    rest = quat_multiply(_q_conj(CANONICAL_GOAL_QUAT),
                         quat_multiply(_q_conj(q_tilt), local_pose.quaternion))
    psi = 2.0 * np.arctan2(rest[2], rest[0])
    psi = (psi + np.pi) % (2.0 * np.pi) - np.pi
    return lo_s - tol <= psi <= hi_s + tol


def _q_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def sample_collision_free_goals(scenario: "Scenario", dist: GoalDistribution,
                                budget: SampleBudget,
                                rng: np.random.Generator | None = None
                                ) -> list[Pose]:
    """Batched rejection sampling of collision-free world-frame goals.

    Stops at ``target_n`` accepted poses or when the budget runs out;
    raises :class:`InfeasibleGoalError` (with attempt statistics) only
    when nothing at all was accepted. Without an explicit generator the
    budget's seed drives the draw.
    """
    if rng is None:
        rng = np.random.default_rng(budget.seed)
    checker = ProjectionChecker(scenario.food, scenario.proxy, scenario.mouth)
    mouth_pose = scenario.mouth.pose
    lo, hi = dist.lows_highs()
    span = dist.spin_range[1] - dist.spin_range[0]
    accepted: list[Pose] = []
    attempts = 0
    t_start = time.monotonic()
    for _ in range(budget.max_batches):
        n = budget.batch_size
        us = rng.random(n)
        phis = 2.0 * np.pi * rng.random(n)
        psis = dist.spin_range[0] + span * rng.random(n)
        offs = rng.uniform(lo, hi, size=(n, 3))
        for i in range(n):
            attempts += 1
            local = Pose(offs[i],
                         _orientation_from_draws(dist, us[i], phis[i], psis[i]))
            world = mouth_pose.compose(local)
            if checker.is_free(world):
                accepted.append(world)
                if len(accepted) >= budget.target_n:
                    return accepted
        if time.monotonic() - t_start > budget.timeout_s:
            break
    if not accepted:
        raise InfeasibleGoalError(
            f"no collision-free goal pose in {attempts} attempts "
            f"({time.monotonic() - t_start:.2f}s)",
            attempts=attempts, accepted=0,
            elapsed_s=time.monotonic() - t_start)
    return accepted


# -- k-medoids -------------------------------------------------------------

@dataclass
class KMedoidsResult:
    medoid_indices: np.ndarray
    assignments: np.ndarray
    total_cost: float
    iterations: int
    converged: bool
    k_reduced: bool


def cluster_kmedoids(poses: Sequence[Pose], k: int,
                     seed: int | np.random.Generator = 0,
                     w_rot: float = 0.1,
                     max_iter: int = 100) -> KMedoidsResult:
    """PAM-style k-medoids under the pose metric.

    Greedy build initialization followed by best-improvement swaps until
    convergence or ``max_iter`` sweeps. Medoids are members of the
    input. Ties break toward lower indices, so the result is
    deterministic for any fixed seed. If ``k`` exceeds the number of
    poses it is reduced (flagged in the result).
    """
    n = len(poses)
    if n == 0:
        raise InvalidSpecError("cannot cluster an empty pose set")
    if k < 1:
        raise InvalidSpecError("k must be at least 1")
    k_reduced = k > n
    k = min(k, n)
    t, q = _stack(poses)
    dist = pairwise_pose_distance(t, q, w_rot)

    # build: start from the 1-medoid optimum, then greedily add the pose
    # that shrinks total assignment cost the most
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    d_near = dist[medoids[0]].copy()
    while len(medoids) < k:
        gains = np.minimum(dist, d_near[None, :]).sum(axis=1)
        gains[medoids] = np.inf
        best = int(np.argmin(gains))
        medoids.append(best)
        np.minimum(d_near, dist[best], out=d_near)

    med = np.asarray(sorted(medoids), dtype=np.int64)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        dm = dist[med]                       # (k, n)
        order = np.argsort(dm, axis=0, kind="stable")
        d1 = dm[order[0], np.arange(n)]
        nearest = order[0]
        d2 = dm[order[1], np.arange(n)] if k > 1 else np.full(n, np.inf)
        best_delta = -1e-12
        best_swap = None
        base = d1.sum()
        candidates = np.setdiff1d(np.arange(n), med, assume_unique=False)
        if not len(candidates):
            converged = True
            break
        dc = dist[candidates]                # (c, n)
        for mi in range(k):
            losers = nearest == mi
            floor = np.where(losers, d2, d1)[None, :]
            new_cost = np.minimum(dc, floor).sum(axis=1)
            deltas = new_cost - base
            j = int(np.argmin(deltas))
            if deltas[j] < best_delta:
                best_delta = float(deltas[j])
                best_swap = (mi, int(candidates[j]))
        if best_swap is None:
            converged = True
            break
        med[best_swap[0]] = best_swap[1]
        med = np.sort(med)

    dm = dist[med]
    assignments = med[np.argmin(dm, axis=0)]
    total = float(dm.min(axis=0).sum())
    return KMedoidsResult(medoid_indices=med, assignments=assignments,
                          total_cost=total, iterations=iterations,
                          converged=converged, k_reduced=k_reduced)


def _stack(poses: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    t = np.stack([p.translation for p in poses])
    q = np.stack([p.quaternion for p in poses])
    return t, q
