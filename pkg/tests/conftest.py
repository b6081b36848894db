"""Shared helpers: random rigid poses, random convex solids, and surface
point sampling used by the brute-force geometry oracles."""

import numpy as np
import pytest

from biteplan.geom.foods import (FoodSpec, make_box_mesh, make_cylinder_mesh,
                                 make_food_mesh)
from biteplan.geom.mesh import TriMesh
from biteplan.geom.pose import Pose, random_quat


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_rigid_pose(rng, t_scale: float = 1.0) -> Pose:
    t = rng.uniform(-t_scale, t_scale, 3)
    return Pose(t, random_quat(rng))


def random_convex_mesh(rng) -> TriMesh:
    """A random box, cylinder, or food primitive for slicing tests."""
    pick = rng.integers(0, 4)
    if pick == 0:
        return make_box_mesh(rng.uniform(0.01, 0.08, 3))
    if pick == 1:
        return make_cylinder_mesh(rng.uniform(0.004, 0.02),
                                  rng.uniform(0.02, 0.1), 24)
    kind = ("carrot", "cantaloupe", "celery", "strawberry")[rng.integers(0, 4)]
    return make_food_mesh(FoodSpec(kind, segments=20))


def surface_points(mesh: TriMesh, subdiv: int = 5) -> np.ndarray:
    """Barycentric grid samples on every triangle, corners included."""
    bary = []
    for i in range(subdiv + 1):
        for j in range(subdiv + 1 - i):
            k = subdiv - i - j
            bary.append((i / subdiv, j / subdiv, k / subdiv))
    bary = np.asarray(bary)                      # (B, 3)
    tris = mesh.triangles                        # (F, 3, 3)
    pts = np.einsum("bk,fkd->fbd", bary, tris)
    return pts.reshape(-1, 3)


@pytest.fixture
def rng():
    return make_rng(0)
