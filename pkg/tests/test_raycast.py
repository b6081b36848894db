"""Grid ray casting vs an exhaustive per-triangle oracle.

The oracle intersects every ray with every triangle via the plane
equation plus 2D half-plane tests, independent of the production
edge-function formulation.
"""

import numpy as np
import pytest

from biteplan.errors import InvalidSpecError
from biteplan.geom.foods import make_box_mesh
from biteplan.geom.mesh import TriMesh, transform_mesh
from biteplan.geom.mouth import MouthModel
from biteplan.geom.pose import Pose
from biteplan.geom.raycast import GridRaycaster, RayGridConfig, raycast_grid
from tests.conftest import make_rng, random_convex_mesh, random_rigid_pose


def _oracle_cast(origins_xy, triangles, z_max):
    """Nearest hit per +z ray; NaN z when the ray misses."""
    out = np.full(len(origins_xy), np.nan)
    for r, (ox, oy) in enumerate(origins_xy):
        best = np.inf
        for tri in triangles:
            v0, v1, v2 = tri
            n = np.cross(v1 - v0, v2 - v0)
            if abs(n[2]) < 1e-15:
                continue                     # ray parallel to the plane
            t = (n @ (v0 - np.array([ox, oy, 0.0]))) / n[2]
            if t < -1e-12 or t > z_max:
                continue
            p = np.array([ox, oy, t])
            # inside test via consistent cross-product signs in the plane
            s = np.array([
                np.cross(v1 - v0, p - v0) @ n,
                np.cross(v2 - v1, p - v1) @ n,
                np.cross(v0 - v2, p - v2) @ n,
            ])
            if (s >= -1e-18).all() or (s <= 1e-18).all():
                best = min(best, max(t, 0.0))
        if np.isfinite(best):
            out[r] = best
    return out


def _wall(z, half=0.5):
    return TriMesh(
        [[-half, -half, z], [half, -half, z],
         [half, half, z], [-half, half, z]],
        [(0, 1, 2), (0, 2, 3)])


def test_empty_scene_no_hits():
    hit, pts = raycast_grid([], MouthModel(), RayGridConfig())
    assert not hit.any()
    assert np.isnan(pts).all()


def test_full_wall_all_rays_hit_at_wall_depth():
    cfg = RayGridConfig(grid_n=8, grid_m=8)
    hit, pts = raycast_grid([_wall(0.3)], MouthModel(), cfg)
    assert hit.all()
    np.testing.assert_allclose(pts[:, 2], 0.3, atol=1e-9)


def test_nearest_of_two_walls_wins():
    cfg = RayGridConfig(grid_n=6, grid_m=6)
    hit, pts = raycast_grid([_wall(0.4), _wall(0.2)], MouthModel(), cfg)
    assert hit.all()
    np.testing.assert_allclose(pts[:, 2], 0.2, atol=1e-9)


def test_hits_beyond_z_max_ignored():
    cfg = RayGridConfig(grid_n=4, grid_m=4, z_max=0.25)
    hit, _ = raycast_grid([_wall(0.3)], MouthModel(), cfg)
    assert not hit.any()


def test_behind_plane_geometry_ignored():
    cfg = RayGridConfig(grid_n=4, grid_m=4)
    hit, _ = raycast_grid([_wall(-0.1)], MouthModel(), cfg)
    assert not hit.any()


def test_grid_origin_layout():
    cfg = RayGridConfig(grid_n=3, grid_m=2, extent=0.4)
    o = cfg.origins()
    assert o.shape == (6, 2)
    assert o[:, 0].min() == pytest.approx(-0.2)
    assert o[:, 0].max() == pytest.approx(0.2)


def test_invalid_grid_rejected():
    with pytest.raises(InvalidSpecError):
        RayGridConfig(grid_n=0, grid_m=4)
    with pytest.raises(InvalidSpecError):
        RayGridConfig(extent=-1.0)


def test_mouth_frame_transform_applied():
    # move the mouth so the wall sits 0.1 in front of its face plane
    mouth = MouthModel(pose=Pose((0.0, 0.0, 0.2)))
    cfg = RayGridConfig(grid_n=4, grid_m=4)
    hit, pts = raycast_grid([_wall(0.3)], mouth, cfg)
    assert hit.all()
    np.testing.assert_allclose(pts[:, 2], 0.1, atol=1e-9)


def test_against_exhaustive_oracle_100_random_scenes():
    rng = make_rng(77)
    mouth = MouthModel()
    cfg = RayGridConfig(grid_n=8, grid_m=8, extent=0.3, z_max=0.5)
    caster = GridRaycaster(mouth, cfg)
    origins = cfg.origins()
    for _ in range(100):
        meshes = []
        for _ in range(rng.integers(1, 4)):
            m = random_convex_mesh(rng)
            pose = Pose(np.array([rng.uniform(-0.1, 0.1),
                                  rng.uniform(-0.1, 0.1),
                                  rng.uniform(0.0, 0.45)]))
            meshes.append(transform_mesh(m, pose))
        hit, pts = caster.cast(meshes)
        tris = np.vstack([m.triangles for m in meshes])
        want = _oracle_cast(origins, tris, cfg.z_max)
        want_hit = np.isfinite(want)
        np.testing.assert_array_equal(hit, want_hit)
        np.testing.assert_allclose(pts[hit, 2], want[want_hit], atol=1e-9)
        # hit points actually lie on some input triangle
        for z, (ox, oy) in zip(pts[hit, 2], origins[hit]):
            assert 0.0 <= z <= cfg.z_max


def test_cast_reusable_buffers_give_same_result():
    rng = make_rng(78)
    mouth = MouthModel()
    cfg = RayGridConfig(grid_n=5, grid_m=5)
    caster = GridRaycaster(mouth, cfg)
    scenes = []
    for _ in range(5):
        m = transform_mesh(random_convex_mesh(rng),
                           Pose((0.0, 0.0, rng.uniform(0.05, 0.3))))
        scenes.append([m])
    first = [caster.cast(s) for s in scenes]
    second = [caster.cast(s) for s in scenes]
    for (h1, p1), (h2, p2) in zip(first, second):
        np.testing.assert_array_equal(h1, h2)
        np.testing.assert_array_equal(p1[h1], p2[h2])
