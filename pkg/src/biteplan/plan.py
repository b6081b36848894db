"""Bidirectional RRT over food poses with cost-guided node selection.

One tree grows from the start pose and one from each goal pose. Node
selection is biased toward low estimated total cost: each candidate
node's cost-from-root plus heuristic-to-opposing-root is mapped to a
quality in [0, 1] and the k nearest neighbours of a random sample are
chosen with probability proportional to that quality (floored so no
node starves). Trees connect greedily; connected paths get a shortcut
smoothing pass that never raises cost and never skips collision checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .costs import CostWeights, SceneCosts, pose_distance
from .errors import InvalidSpecError, InvalidStartError, NoTrajectoryError
from .geom.pose import Pose, random_quat
from .geom.raycast import RayGridConfig
from .scenario import Scenario


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs for tree growth, connection, and smoothing."""

    step_eps: float = 0.01
    knn_k: int = 8
    max_iters: int = 5000
    edge_check_resolution: float = 0.005
    goal_connect_radius: float = 0.005
    smoothing_iters: int = 200
    m_floor: float = 0.1
    tau_scale: float = 0.5
    sample_margin: float = 0.10
    straight_line_first: bool = True
    max_connect_steps: int = 2000

    def __post_init__(self):
        if self.step_eps <= 0.0 or self.edge_check_resolution <= 0.0:
            raise InvalidSpecError("step sizes must be positive")
        if self.goal_connect_radius <= 0.0:
            raise InvalidSpecError("goal_connect_radius must be positive")
        if self.knn_k < 1 or self.max_iters < 0 or self.smoothing_iters < 0:
            raise InvalidSpecError("counts must be non-negative (knn_k >= 1)")
        if not (0.0 < self.m_floor <= 1.0):
            raise InvalidSpecError("m_floor must be in (0, 1]")
        if self.tau_scale <= 0.0 or self.sample_margin < 0.0:
            raise InvalidSpecError("tau_scale must be positive")


@dataclass
class Trajectory:
    """A collision-free waypoint path to one goal.

    ``edge_costs`` align with consecutive waypoint pairs;
    ``total_cost`` adds the mode's goal terms on top of the path cost.
    """

    waypoints: list[Pose]
    edge_costs: np.ndarray
    goal_index: int
    efficiency_at_goal: float
    comfort_at_goal: float
    total_cost: float

    @property
    def path_cost(self) -> float:
        return float(self.edge_costs.sum())

    @property
    def n_waypoints(self) -> int:
        return len(self.waypoints)

    def path_length(self, w_rot: float = 0.1) -> float:
        """Plain pose-metric length, uninflated by comfort."""
        return float(sum(pose_distance(a, b, w_rot) for a, b in
                         zip(self.waypoints[:-1], self.waypoints[1:])))

    def to_dict(self) -> dict:
        return {
            "goal_index": self.goal_index,
            "total_cost": self.total_cost,
            "path_cost": self.path_cost,
            "efficiency_at_goal": self.efficiency_at_goal,
            "comfort_at_goal": self.comfort_at_goal,
            "edge_costs": [float(c) for c in self.edge_costs],
            "waypoints": [p.to_dict() for p in self.waypoints],
        }

    @staticmethod
    def from_dict(d: dict) -> "Trajectory":
        return Trajectory(
            waypoints=[Pose.from_dict(w) for w in d["waypoints"]],
            edge_costs=np.asarray(d["edge_costs"], dtype=np.float64),
            goal_index=int(d["goal_index"]),
            efficiency_at_goal=float(d["efficiency_at_goal"]),
            comfort_at_goal=float(d["comfort_at_goal"]),
            total_cost=float(d["total_cost"]))

    def to_csv(self) -> str:
        """Waypoint table; edge_cost on row i prices the edge arriving
        at waypoint i (blank on the first row)."""
        lines = ["index,tx,ty,tz,qw,qx,qy,qz,edge_cost"]
        for i, p in enumerate(self.waypoints):
            cost = "" if i == 0 else f"{self.edge_costs[i - 1]:.17g}"
            nums = ",".join(f"{v:.17g}" for v in
                            (*p.translation, *p.quaternion))
            lines.append(f"{i},{nums},{cost}")
        return "\n".join(lines) + "\n"


@dataclass
class PlanStats:
    iterations: int = 0
    extensions: int = 0
    blocked_extensions: int = 0
    collision_checks: int = 0
    quality_clamps: int = 0
    straight_line_hits: int = 0
    connects: int = 0
    goals_reached: int = 0
    goal_reached: list = field(default_factory=list)
    goal_connect_iteration: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "iterations", "extensions", "blocked_extensions",
            "collision_checks", "quality_clamps", "straight_line_hits",
            "connects", "goals_reached", "goal_reached",
            "goal_connect_iteration")}


@dataclass
class PlanResult:
    trajectories: list
    stats: PlanStats

    def best(self) -> Trajectory:
        return select_trajectory([t for t in self.trajectories
                                  if t is not None])


def node_quality(cost: float, c_star: float, c_max: float) -> float:
    """Map a node cost onto [0, 1]; the cheapest plausible node gets 1.

    When the tree has no cost spread (``c_max <= c_star``) every node is
    equally good.
    """
    if c_max <= c_star:
        return 1.0
    raw = 1.0 - (cost - c_star) / (c_max - c_star)
    return min(1.0, max(0.0, raw))


def select_goal_tree(goal_costs: Sequence[float], rng: np.random.Generator,
                     tau: float) -> int:
    """Softmax pick over goals, biased toward cheap heuristics.

    Probability of goal i is exp(-cost_i / tau) normalized; a
    non-positive or non-finite temperature degrades to uniform.
    """
    costs = np.asarray(goal_costs, dtype=np.float64)
    if not len(costs):
        raise InvalidSpecError("select_goal_tree needs at least one goal")
    if not np.isfinite(tau) or tau <= 0.0:
        probs = np.full(len(costs), 1.0 / len(costs))
    else:
        logits = -(costs - costs.min()) / tau
        ws = np.exp(logits)
        probs = ws / ws.sum()
    return int(rng.choice(len(costs), p=probs))


class _Tree:
    """Growable pose store with parent links and cost-from-root."""

    def __init__(self, root: Pose, cap: int = 64):
        self.T = np.empty((cap, 3))
        self.Q = np.empty((cap, 4))
        self.parent = np.empty(cap, dtype=np.int64)
        self.g = np.empty(cap)
        self.poses: list[Pose] = []
        self.n = 0
        self.add(root, -1, 0.0)

    def add(self, pose: Pose, parent: int, g: float) -> int:
        if self.n == len(self.g):
            grow = len(self.g)
            self.T = np.vstack([self.T, np.empty((grow, 3))])
            self.Q = np.vstack([self.Q, np.empty((grow, 4))])
            self.parent = np.concatenate([self.parent,
                                          np.empty(grow, dtype=np.int64)])
            self.g = np.concatenate([self.g, np.empty(grow)])
        i = self.n
        self.T[i] = pose.translation
        self.Q[i] = pose.quaternion
        self.parent[i] = parent
        self.g[i] = g
        self.poses.append(pose)
        self.n += 1
        return i

    def chain(self, idx: int) -> list[int]:
        out = []
        while idx >= 0:
            out.append(idx)
            idx = int(self.parent[idx])
        out.reverse()
        return out

    def dists_to(self, pose: Pose, w_rot: float) -> np.ndarray:
        dt = self.T[:self.n] - pose.translation
        dots = np.abs(self.Q[:self.n] @ pose.quaternion)
        ang = 2.0 * np.arccos(np.clip(dots, 0.0, 1.0))
        return np.sqrt((dt * dt).sum(axis=1) + (w_rot * ang) ** 2)


def _edge_free(scene: SceneCosts, a: Pose, b: Pose, length: float,
               cfg: PlannerConfig, stats: PlanStats) -> bool:
    """Check the geodesic a -> b at the configured resolution.

    The endpoint b is included; a is assumed already known free.
    """
    steps = max(1, math.ceil(length / cfg.edge_check_resolution))
    for i in range(1, steps + 1):
        stats.collision_checks += 1
        if not scene.is_free(a.interpolate(b, i / steps)):
            return False
    return True


def select_tree_node(tree: _Tree, x: Pose, h_all: np.ndarray, c_star: float,
                     rng: np.random.Generator, cfg: PlannerConfig,
                     w_rot: float, stats: PlanStats | None = None) -> int:
    """Quality-weighted pick among the k nearest nodes to ``x``.

    ``h_all`` holds each node's heuristic to the opposing root; node
    cost is g + h, mapped through :func:`node_quality` against the
    tree-wide max and floored at ``cfg.m_floor`` so nothing starves.
    """
    stats = stats if stats is not None else PlanStats()
    d = tree.dists_to(x, w_rot)
    k = min(cfg.knn_k, tree.n)
    idx = np.argsort(d, kind="stable")[:k]
    c_all = tree.g[:tree.n] + h_all
    c_max = float(c_all.max())
    if c_max <= c_star:
        quality = np.ones(k)
    else:
        raw = 1.0 - (c_all[idx] - c_star) / (c_max - c_star)
        stats.quality_clamps += int(((raw < 0.0) | (raw > 1.0)).sum())
        quality = np.clip(raw, 0.0, 1.0)
    weights = np.maximum(quality, cfg.m_floor)
    weights /= weights.sum()
    return int(idx[rng.choice(k, p=weights)])


def _extend(tree: _Tree, sel: int, x: Pose, scene: SceneCosts,
            cfg: PlannerConfig, stats: PlanStats) -> int | None:
    a = tree.poses[sel]
    d = pose_distance(a, x, scene.weights.w_rot)
    if d < 1e-12:
        return None
    stats.extensions += 1
    frac = min(1.0, cfg.step_eps / d)
    new = a.interpolate(x, frac)
    if not _edge_free(scene, a, new, d * frac, cfg, stats):
        stats.blocked_extensions += 1
        return None
    return tree.add(new, sel, float(tree.g[sel]) + scene.edge_cost(a, new))


def _greedy_connect(tree: _Tree, start_idx: int, target: Pose,
                    scene: SceneCosts, cfg: PlannerConfig,
                    stats: PlanStats) -> int | None:
    """March ``tree`` toward ``target``; return the junction node index.

    Steps shrink the remaining distance monotonically, so this
    terminates; the step cap is a belt-and-braces guard.
    """
    cur = start_idx
    w_rot = scene.weights.w_rot
    for _ in range(cfg.max_connect_steps):
        a = tree.poses[cur]
        d = pose_distance(a, target, w_rot)
        if d <= cfg.goal_connect_radius:
            if d == 0.0:
                return cur
            if not _edge_free(scene, a, target, d, cfg, stats):
                return None
            return tree.add(target, cur,
                            float(tree.g[cur]) + scene.edge_cost(a, target))
        frac = min(1.0, cfg.step_eps / d)
        new = a.interpolate(target, frac)
        if not _edge_free(scene, a, new, d * frac, cfg, stats):
            return None
        cur = tree.add(new, cur, float(tree.g[cur]) + scene.edge_cost(a, new))
    return None


def _sample_pose(rng: np.random.Generator, lo: np.ndarray,
                 hi: np.ndarray) -> Pose:
    t = rng.uniform(lo, hi)
    return Pose(t, random_quat(rng))


def _path_trajectory(scene: SceneCosts, waypoints: list[Pose],
                     goal_index: int, goal_terms: tuple[float, float]
                     ) -> Trajectory:
    """Assemble a trajectory, pricing each edge under the active mode."""
    costs = np.array([scene.edge_cost(a, b) for a, b in
                      zip(waypoints[:-1], waypoints[1:])])
    w = scene.weights
    total = float(costs.sum())
    eff, comf = goal_terms
    if w.mode in ("efficiency", "combined"):
        total += w.beta_E * eff
    if w.mode in ("comfort", "combined"):
        total += w.beta_C * comf
    return Trajectory(waypoints=list(waypoints), edge_costs=costs,
                      goal_index=goal_index, efficiency_at_goal=eff,
                      comfort_at_goal=comf, total_cost=total)


def smooth_path(traj: Trajectory, scene: SceneCosts, cfg: PlannerConfig,
                rng: np.random.Generator,
                stats: PlanStats | None = None) -> Trajectory:
    """Shortcut smoothing: random segment replacement by the geodesic.

    A shortcut is re-discretized at the step size, fully collision
    checked, and accepted only when it does not raise the replaced
    segment's cost. Waypoint spacing therefore never exceeds
    ``step_eps`` and validity is preserved.
    """
    stats = stats if stats is not None else PlanStats()
    w = list(traj.waypoints)
    costs = list(float(c) for c in traj.edge_costs)
    w_rot = scene.weights.w_rot
    for _ in range(cfg.smoothing_iters):
        n = len(w)
        if n < 3:
            break
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        if i > j:
            i, j = j, i
        if j - i < 2:
            continue
        a, b = w[i], w[j]
        d = pose_distance(a, b, w_rot)
        m = max(1, math.ceil(d / cfg.step_eps))
        new_wp = [a.interpolate(b, t / m) for t in range(1, m)]
        seg = [a, *new_wp, b]
        ok = True
        for u, v in zip(seg[:-1], seg[1:]):
            if not _edge_free(scene, u, v,
                              pose_distance(u, v, w_rot), cfg, stats):
                ok = False
                break
        if not ok:
            continue
        new_costs = [scene.edge_cost(u, v)
                     for u, v in zip(seg[:-1], seg[1:])]
        if sum(new_costs) <= sum(costs[i:j]) + 1e-12:
            w[i + 1:j] = new_wp
            costs[i:j] = new_costs
    goal_terms = (traj.efficiency_at_goal, traj.comfort_at_goal)
    return _path_trajectory(scene, w, traj.goal_index, goal_terms)


def select_trajectory(trajectories: Sequence[Trajectory]) -> Trajectory:
    """Lowest total cost wins; ties break to fewer waypoints, then to
    the lower goal index."""
    pool = [t for t in trajectories if t is not None]
    if not pool:
        raise NoTrajectoryError("no trajectories to select from")
    return min(pool, key=lambda t: (t.total_cost, t.n_waypoints,
                                    t.goal_index))


def interpolate_trajectory(traj: Trajectory, v_max: float = 0.05,
                           dt: float = 0.05, follow_radius: float = 0.005,
                           w_rot: float = 0.1) -> list[tuple[float, Pose]]:
    """Time-parameterize a waypoint path at a velocity cap.

    Emits (time, pose) samples no more than ``v_max * dt`` apart in the
    pose metric, visiting waypoints in order: a waypoint is considered
    reached when the tracker passes within ``follow_radius``, except the
    last, which is reached exactly.
    """
    if v_max <= 0.0 or dt <= 0.0 or follow_radius < 0.0:
        raise InvalidSpecError("v_max and dt must be positive")
    if not traj.waypoints:
        raise InvalidSpecError("empty trajectory")
    out = [(0.0, traj.waypoints[0])]
    cur = traj.waypoints[0]
    t = 0.0
    k = 1
    last = len(traj.waypoints) - 1
    step = v_max * dt
    guard = 1000 + 8 * math.ceil(
        (traj.path_length(w_rot) + 1e-9) / step)
    while k <= last:
        if guard <= 0:
            raise NoTrajectoryError("interpolation failed to terminate")
        guard -= 1
        d = pose_distance(cur, traj.waypoints[k], w_rot)
        if k < last and d <= follow_radius:
            k += 1
            continue
        if d <= step:
            cur = traj.waypoints[k]
            k += 1
        else:
            cur = cur.interpolate(traj.waypoints[k], step / d)
        t += dt
        out.append((t, cur))
    return out


def hbirrt_plan(scenario: Scenario, goals: Sequence[Pose],
                weights: CostWeights, config: PlannerConfig,
                rng: np.random.Generator,
                ray_config: RayGridConfig | None = None) -> PlanResult:
    """Plan one trajectory per reachable goal.

    Grows a start tree and one tree per goal. Each iteration picks a
    goal by softmax over heuristic costs (temperature is half the
    median unconnected cost), draws a uniform pose sample, extends the
    smaller of the two trees toward it, then marches the other tree
    toward the new node. Connected paths are smoothed immediately.
    Raises when the start is in collision or when the iteration budget
    ends with no goal connected.
    """
    if not goals:
        raise InvalidSpecError("hbirrt_plan needs at least one goal")
    scene = SceneCosts(scenario.food, scenario.proxy, scenario.mouth,
                       weights, ray_config)
    stats = PlanStats()
    w_rot = weights.w_rot

    stats.collision_checks += 1
    if not scene.is_free(scenario.start):
        raise InvalidStartError("start pose fails the projection check")

    n_goals = len(goals)
    goal_terms = []
    goal_costs = np.empty(n_goals)
    goal_alive = np.ones(n_goals, dtype=bool)
    for k, gp in enumerate(goals):
        terms = scene.goal_terms(gp)
        goal_terms.append(terms)
        goal_costs[k] = scene.heuristic(scenario.start, gp, terms)
        stats.collision_checks += 1
        if not scene.is_free(gp):
            goal_alive[k] = False

    start_tree = _Tree(scenario.start)
    goal_trees = [_Tree(gp) for gp in goals]
    # per-pair baseline: the straight-shot heuristic from the start
    c_star_start = np.array([scene.heuristic(scenario.start, gp, goal_terms[k])
                             for k, gp in enumerate(goals)])
    c_star_goal = np.array([pose_distance(gp, scenario.start, w_rot)
                            for gp in goals])

    trajectories: list[Trajectory | None] = [None] * n_goals
    connected = np.zeros(n_goals, dtype=bool)
    stats.goal_connect_iteration = [None] * n_goals

    pts = np.vstack([scenario.start.translation] +
                    [g.translation for g in goals])
    lo = pts.min(axis=0) - config.sample_margin
    hi = pts.max(axis=0) + config.sample_margin

    def finish(k: int, waypoints: list[Pose], iteration: int):
        traj = _path_trajectory(scene, waypoints, k, goal_terms[k])
        traj = smooth_path(traj, scene, config, rng, stats)
        trajectories[k] = traj
        connected[k] = True
        stats.connects += 1
        stats.goal_connect_iteration[k] = iteration

    if config.straight_line_first:
        for k, gp in enumerate(goals):
            if not goal_alive[k]:
                continue
            d = pose_distance(scenario.start, gp, w_rot)
            if d < 1e-12:
                finish(k, [scenario.start, gp], 0)
                stats.straight_line_hits += 1
                continue
            if _edge_free(scene, scenario.start, gp, d, config, stats):
                m = max(1, math.ceil(d / config.step_eps))
                # end on the goal pose itself, not its interpolated twin
                wps = [scenario.start.interpolate(gp, i / m)
                       for i in range(m)] + [gp]
                finish(k, wps, 0)
                stats.straight_line_hits += 1

    while stats.iterations < config.max_iters:
        open_idx = np.flatnonzero(goal_alive & ~connected)
        if not len(open_idx):
            break
        stats.iterations += 1
        open_costs = goal_costs[open_idx]
        tau = config.tau_scale * float(np.median(open_costs))
        k = int(open_idx[select_goal_tree(open_costs, rng, tau)])
        x = _sample_pose(rng, lo, hi)
        gtree = goal_trees[k]

        start_is_a = start_tree.n <= gtree.n
        tree_a, tree_b = (start_tree, gtree) if start_is_a \
            else (gtree, start_tree)

        def h_for(tree) -> np.ndarray:
            if tree is start_tree:
                # goal-term constant = c_star_start - plain distance;
                # it cancels inside the quality map but keeps the cost
                # semantics honest
                return tree.dists_to(goals[k], w_rot) + \
                    (c_star_start[k] - c_star_goal[k])
            return tree.dists_to(scenario.start, w_rot)

        c_star_a = c_star_start[k] if start_is_a else c_star_goal[k]
        sel = select_tree_node(tree_a, x, h_for(tree_a), c_star_a, rng,
                           config, w_rot, stats)
        new_idx = _extend(tree_a, sel, x, scene, config, stats)
        if new_idx is None:
            continue
        target = tree_a.poses[new_idx]

        c_star_b = c_star_goal[k] if start_is_a else c_star_start[k]
        sel_b = select_tree_node(tree_b, target, h_for(tree_b), c_star_b, rng,
                             config, w_rot, stats)
        junction = _greedy_connect(tree_b, sel_b, target, scene, config,
                                   stats)
        if junction is None:
            continue

        if start_is_a:
            s_chain = start_tree.chain(new_idx)
            g_chain = gtree.chain(junction)
        else:
            s_chain = start_tree.chain(junction)
            g_chain = gtree.chain(new_idx)
        wps = [start_tree.poses[i] for i in s_chain]
        tail = [gtree.poses[i] for i in reversed(g_chain)]
        # both chains end at the junction pose; keep one copy
        wps.extend(tail[1:])
        finish(k, wps, stats.iterations)

    stats.goal_reached = [bool(c) for c in connected]
    stats.goals_reached = int(connected.sum())
    if stats.goals_reached == 0:
        raise NoTrajectoryError(
            f"no goal connected within {config.max_iters} iterations "
            f"({stats.collision_checks} collision checks)")
    return PlanResult(trajectories=trajectories, stats=stats)
