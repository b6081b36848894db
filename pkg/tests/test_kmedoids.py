"""k-medoids clustering under the pose metric vs exhaustive search."""

from itertools import combinations

import numpy as np
import pytest

from biteplan.costs import pose_distance
from biteplan.errors import InvalidSpecError
from biteplan.geom.pose import Pose
from biteplan.sample import cluster_kmedoids
from tests.conftest import make_rng, random_rigid_pose


def _scalar_distance_matrix(poses, w_rot=0.1):
    n = len(poses)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = pose_distance(poses[i], poses[j], w_rot)
    return d


def _exhaustive_best(dist, k):
    n = len(dist)
    best_cost, best_set = np.inf, None
    for combo in combinations(range(n), k):
        cost = dist[list(combo)].min(axis=0).sum()
        if cost < best_cost:
            best_cost, best_set = cost, combo
    return best_cost, best_set


def test_k_equals_n_selects_everything():
    rng = make_rng(20)
    poses = [random_rigid_pose(rng, 0.3) for _ in range(6)]
    res = cluster_kmedoids(poses, k=6)
    assert np.array_equal(res.medoid_indices, np.arange(6))
    assert res.total_cost == 0.0
    assert np.array_equal(res.assignments, np.arange(6))
    assert not res.k_reduced


def test_identical_poses_have_zero_cost():
    p = Pose((0.01, 0.02, 0.03))
    res = cluster_kmedoids([p] * 8, k=3)
    assert res.total_cost == 0.0
    assert set(res.assignments) <= set(res.medoid_indices)


def test_within_five_percent_of_exhaustive_optimum():
    rng = make_rng(21)
    for _ in range(20):
        poses = [random_rigid_pose(rng, 0.3) for _ in range(12)]
        dist = _scalar_distance_matrix(poses)
        best_cost, _ = _exhaustive_best(dist, 3)
        res = cluster_kmedoids(poses, k=3)
        # scalar and batch metric paths agree to ~1e-8 (arccos conditioning)
        assert res.total_cost >= best_cost - 1e-7
        assert res.total_cost <= 1.05 * best_cost + 1e-12
        # membership must be the argmin assignment over the medoid rows
        dm = dist[res.medoid_indices]
        want = res.medoid_indices[np.argmin(dm, axis=0)]
        assert np.array_equal(res.assignments, want)
        assert res.total_cost == pytest.approx(dm.min(axis=0).sum(), abs=1e-7)


def test_k_above_n_is_reduced_and_flagged():
    rng = make_rng(22)
    poses = [random_rigid_pose(rng, 0.3) for _ in range(4)]
    res = cluster_kmedoids(poses, k=9)
    assert res.k_reduced
    assert len(res.medoid_indices) == 4


def test_swap_phase_never_worse_than_greedy_build():
    rng = make_rng(23)
    for _ in range(15):
        poses = [random_rigid_pose(rng, 0.3) for _ in range(15)]
        greedy = cluster_kmedoids(poses, k=4, max_iter=0)
        refined = cluster_kmedoids(poses, k=4)
        assert refined.total_cost <= greedy.total_cost + 1e-12
        assert refined.converged
        assert greedy.iterations == 0


def test_deterministic_for_equal_inputs():
    rng = make_rng(24)
    poses = [random_rigid_pose(rng, 0.3) for _ in range(10)]
    a = cluster_kmedoids(poses, k=3)
    b = cluster_kmedoids(poses, k=3)
    assert np.array_equal(a.medoid_indices, b.medoid_indices)
    assert np.array_equal(a.assignments, b.assignments)
    assert a.total_cost == b.total_cost


def test_medoids_are_distinct_members():
    rng = make_rng(25)
    poses = [random_rigid_pose(rng, 0.3) for _ in range(20)]
    res = cluster_kmedoids(poses, k=5)
    med = res.medoid_indices
    assert len(set(med.tolist())) == 5
    assert ((med >= 0) & (med < 20)).all()
    assert set(res.assignments.tolist()) <= set(med.tolist())


def test_validation():
    with pytest.raises(InvalidSpecError):
        cluster_kmedoids([], k=1)
    with pytest.raises(InvalidSpecError):
        cluster_kmedoids([Pose((0.0, 0.0, 0.0))], k=0)
