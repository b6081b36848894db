import numpy as np
import pytest

from biteplan.errors import InvalidPlaneError, InvalidSpecError, TopologyError
from biteplan.geom.foods import make_box_mesh, make_cylinder_mesh
from biteplan.geom.mesh import (TriMesh, concatenate_meshes, is_watertight,
                                load_obj, mesh_volume, save_obj,
                                slice_mesh_by_plane, transform_mesh,
                                watertight_report)
from biteplan.geom.pose import Pose
from tests.conftest import make_rng, random_convex_mesh, random_rigid_pose


def unit_cube():
    return make_box_mesh((1.0, 1.0, 1.0))


def test_unit_cube_volume_exact():
    assert mesh_volume(unit_cube()) == pytest.approx(1.0, abs=1e-12)


def test_cylinder_volume_analytic():
    r, h = 0.01, 0.1
    m = make_cylinder_mesh(r, h, 64)
    exact = np.pi * r * r * h
    assert mesh_volume(m) == pytest.approx(exact, rel=0.005)


def test_face_index_out_of_range_rejected():
    with pytest.raises((InvalidSpecError, TopologyError, ValueError)):
        TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [(0, 1, 3)])


def test_watertight_report_on_open_mesh():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [(0, 1, 2)])
    rep = watertight_report(m)
    assert rep["boundary_edges"] == 3
    assert not is_watertight(m)


def test_volume_requires_watertight():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [(0, 1, 2)])
    with pytest.raises(TopologyError):
        mesh_volume(m)


def test_transform_identity_keeps_vertices():
    m = unit_cube()
    t = transform_mesh(m, Pose.identity())
    np.testing.assert_array_equal(t.vertices, m.vertices)
    np.testing.assert_array_equal(t.faces, m.faces)


def test_transform_moves_centroid_linearly():
    m = unit_cube()
    t = transform_mesh(m, Pose((1.0, 2.0, 3.0)))
    np.testing.assert_allclose(t.centroid - m.centroid, [1, 2, 3], atol=1e-9)


def test_rigid_transform_volume_invariant():
    rng = make_rng(10)
    base = random_convex_mesh(rng)
    v0 = mesh_volume(base)
    for _ in range(100):
        t = transform_mesh(base, random_rigid_pose(rng))
        assert mesh_volume(t) == pytest.approx(v0, rel=1e-9)


def test_slice_plane_below_mesh_returns_all_outside():
    m = unit_cube()
    inside, outside = slice_mesh_by_plane(m, (0, 0, -2.0), (0, 0, 1.0))
    assert inside.volume == pytest.approx(0.0, abs=1e-15)
    assert outside.volume == pytest.approx(1.0, abs=1e-12)


def test_slice_cube_through_centroid_halves():
    m = unit_cube()
    inside, outside = slice_mesh_by_plane(m, (0, 0, 0), (0, 0, 1.0))
    assert inside.volume == pytest.approx(0.5, abs=1e-9)
    assert outside.volume == pytest.approx(0.5, abs=1e-9)


def test_slice_sides_are_watertight():
    rng = make_rng(11)
    for _ in range(25):
        m = random_convex_mesh(rng)
        point = m.centroid + rng.normal(0, 0.01, 3)
        normal = rng.normal(size=3)
        inside, outside = slice_mesh_by_plane(m, point, normal)
        for part in (inside, outside):
            if len(part.faces):
                assert is_watertight(part)


def test_slice_degenerate_normal_rejected():
    with pytest.raises(InvalidPlaneError):
        slice_mesh_by_plane(unit_cube(), (0, 0, 0), (0, 0, 0))


def test_slice_conservation_500_random_cases():
    rng = make_rng(12)
    worst = 0.0
    for _ in range(500):
        m = random_convex_mesh(rng)
        point = m.centroid + rng.normal(0, 0.02, 3)
        normal = rng.normal(size=3)
        if np.linalg.norm(normal) < 1e-6:
            continue
        inside, outside = slice_mesh_by_plane(m, point, normal)
        v = mesh_volume(m)
        err = abs(inside.volume + outside.volume - v) / v
        worst = max(worst, err)
    assert worst <= 1e-6


def test_slice_inside_is_behind_normal():
    m = unit_cube()
    inside, _ = slice_mesh_by_plane(m, (0, 0, 0.25), (0, 0, 1.0))
    assert len(inside.faces)
    assert inside.vertices[:, 2].max() <= 0.25 + 1e-12


def test_concatenate_meshes_volume_adds():
    a = make_box_mesh((0.1, 0.1, 0.1))
    b = transform_mesh(make_box_mesh((0.2, 0.1, 0.1)), Pose((1.0, 0, 0)))
    c = concatenate_meshes([a, b])
    assert mesh_volume(c) == pytest.approx(a.volume + b.volume, rel=1e-12)


def test_obj_round_trip(tmp_path):
    rng = make_rng(13)
    m = random_convex_mesh(rng)
    path = tmp_path / "mesh.obj"
    save_obj(m, path)
    back = load_obj(path)
    np.testing.assert_allclose(back.vertices, m.vertices, atol=1e-12)
    np.testing.assert_array_equal(back.faces, m.faces)


def test_obj_rejects_quads(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises((InvalidSpecError, TopologyError, ValueError)):
        load_obj(path)
