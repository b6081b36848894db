"""Geometry layer: poses, meshes, food solids, mouth model, raycasting."""

from .foods import (DEFAULT_DIMENSIONS, FOOD_KINDS, FoodSpec, make_box_mesh,
                    make_cylinder_mesh, make_food_mesh)
from .mesh import (TriMesh, concatenate_meshes, is_watertight, load_obj,
                   mesh_volume, require_watertight, save_obj,
                   slice_mesh_by_plane, transform_mesh, watertight_report)
from .mouth import (MouthModel, ProjectionChecker, ProxyBody, RobotProxy,
                    projection_collision_check)
from .pose import (Pose, poses_to_arrays, quat_angle, quat_from_axis_angle,
                   quat_from_two_vectors, quat_multiply, quat_normalize,
                   quat_rotate, quat_slerp, quat_to_matrix, random_quat)
from .raycast import GridRaycaster, RayGridConfig, raycast_grid

__all__ = [
    "DEFAULT_DIMENSIONS", "FOOD_KINDS", "FoodSpec", "GridRaycaster",
    "MouthModel", "Pose", "ProjectionChecker", "ProxyBody", "RayGridConfig",
    "RobotProxy", "TriMesh", "concatenate_meshes", "is_watertight",
    "load_obj", "make_box_mesh", "make_cylinder_mesh", "make_food_mesh",
    "mesh_volume", "poses_to_arrays", "projection_collision_check",
    "quat_angle", "quat_from_axis_angle", "quat_from_two_vectors",
    "quat_multiply", "quat_normalize", "quat_rotate", "quat_slerp",
    "quat_to_matrix", "random_quat", "raycast_grid", "require_watertight",
    "save_obj", "slice_mesh_by_plane", "transform_mesh", "watertight_report",
]
