"""Mouth opening model, fork/arm proxy bodies, and the projection
collision check.

The mouth frame has +z pointing out of the mouth (toward the robot),
+y up, +x sideways. The opening is an ellipse in the face plane z = 0;
the mouth interior is the elliptical slab -depth_in <= z <= 0. Geometry
with mouth-frame z > 0 is in front of the face.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InvalidSpecError
from .foods import make_box_mesh, make_cylinder_mesh
from .mesh import TriMesh
from .pose import Pose

_ELLIPSE_TOL = 1e-12


@dataclass(frozen=True)
class MouthModel:
    """Elliptical mouth opening with a finite insertion depth.

    ``radii`` are the (side, vertical) semi-axes of the opening in
    meters; ``depth_in`` is how deep geometry may reach behind the face
    plane before we call it a collision with the inside of the mouth.
    """

    pose: Pose = field(default_factory=Pose.identity)
    radii: tuple[float, float] = (0.032, 0.026)
    depth_in: float = 0.06

    def __post_init__(self):
        a, b = self.radii
        if not (a > 0.0 and b > 0.0 and self.depth_in > 0.0):
            raise InvalidSpecError(
                f"mouth radii and depth must be positive, got "
                f"radii={self.radii}, depth_in={self.depth_in}")
        object.__setattr__(self, "radii", (float(a), float(b)))

    def world_to_mouth(self, pose: Pose) -> Pose:
        return self.pose.inverse().compose(pose)


@dataclass(frozen=True)
class ProxyBody:
    name: str
    mesh: TriMesh
    offset: Pose  # rigid offset from the food pose


@dataclass(frozen=True)
class RobotProxy:
    """Rigid bodies dragged along with the food during planning.

    Offsets are relative to the food pose, so the world pose of body i
    is ``food_pose.compose(offset_i)``. ``ee_index`` marks the
    end-effector block, which must never reach the face plane.
    """

    bodies: tuple[ProxyBody, ...] = ()
    ee_index: int | None = None

    def __post_init__(self):
        if self.ee_index is not None and not (
                0 <= self.ee_index < len(self.bodies)):
            raise InvalidSpecError("ee_index out of range")

    @classmethod
    def default(cls, food_pose_on_fork: Pose | None = None,
                segments: int = 32) -> "RobotProxy":
        """Fork tines + handle + end-effector block.

        Bodies are laid out in the fork frame (+y runs from the handle
        toward the tine tips, food skewered at the origin) and then
        re-expressed relative to the food via the inverse of
        ``food_pose_on_fork``.
        """
        pf = food_pose_on_fork or Pose.identity()
        tines = make_box_mesh((0.02, 0.06, 0.003))
        handle = make_cylinder_mesh(0.004, 0.12, segments)
        block = make_box_mesh((0.08, 0.08, 0.1))
        # the gripper wraps the back half of the handle, so the block
        # rides ~9 cm behind the food and looms near the face exactly
        # when the food is inserted deep
        in_fork = [
            ("tines", tines, Pose((0.0, -0.03, 0.0))),
            ("handle", handle, Pose((0.0, -0.12, 0.0))),
            ("ee_block", block, Pose((0.0, -0.14, 0.0))),
        ]
        inv = pf.inverse()
        bodies = tuple(ProxyBody(name, mesh, inv.compose(p))
                       for name, mesh, p in in_fork)
        return cls(bodies=bodies, ee_index=2)

    def posed_meshes(self, food_pose: Pose) -> list[TriMesh]:
        from .mesh import transform_mesh
        return [transform_mesh(b.mesh, food_pose.compose(b.offset))
                for b in self.bodies]


class ProjectionChecker:
    """Precomputed collision test between (food + proxy) and the mouth.

    The test is exact for the tessellated solids: behind-plane vertices
    plus face-plane crossing points must all project into the opening
    ellipse and stay above the slab floor, and the end-effector block
    must stay strictly in front of the face. Convexity of the elliptic
    slab makes vertex containment imply containment of whole triangles.
    """

    def __init__(self, food: TriMesh, proxy: RobotProxy, mouth: MouthModel):
        self.mouth = mouth
        pts = [food.vertices]
        faces = [food.faces]
        base = len(food.vertices)
        ee_pts = np.zeros((0, 3))
        for i, body in enumerate(proxy.bodies):
            v = body.offset.apply(body.mesh.vertices)
            if i == proxy.ee_index:
                ee_pts = v
                continue
            pts.append(v)
            faces.append(body.mesh.faces + base)
            base += len(v)
        self._pts = np.vstack(pts)
        self._faces = np.vstack(faces)
        self._ee_pts = ee_pts
        # cache edge index pairs of all faces for crossing interpolation
        f = self._faces
        self._edges = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        inv = mouth.pose.inverse()
        self._rot = inv.rotation_matrix
        self._off = inv.translation

    def is_free(self, food_pose: Pose) -> bool:
        """True when the scene at ``food_pose`` does not collide with
        the mouth walls, slab floor, or face plane."""
        m = self._rot @ food_pose.rotation_matrix
        c = self._rot @ food_pose.translation + self._off
        a, b = self.mouth.radii

        if len(self._ee_pts):
            ee_z = self._ee_pts @ m[2] + c[2]
            if (ee_z <= 0.0).any():
                return False

        p = self._pts @ m.T + c
        z = p[:, 2]
        behind = z <= 0.0
        if behind.any():
            if (z[behind] < -self.mouth.depth_in).any():
                return False
            q = p[behind]
            if ((q[:, 0] / a) ** 2 + (q[:, 1] / b) ** 2
                    > 1.0 + _ELLIPSE_TOL).any():
                return False

        # face-plane crossing edges add containment points at z = 0
        ze = z[self._edges]
        cross = (ze[:, 0] * ze[:, 1]) < 0.0
        if cross.any():
            e = self._edges[cross]
            z0, z1 = ze[cross, 0], ze[cross, 1]
            t = (z0 / (z0 - z1))[:, None]
            pts = p[e[:, 0]] + t * (p[e[:, 1]] - p[e[:, 0]])
            if ((pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2
                    > 1.0 + _ELLIPSE_TOL).any():
                return False
        return True


def projection_collision_check(food: TriMesh, food_pose: Pose,
                               proxy: RobotProxy, mouth: MouthModel) -> bool:
    """One-shot form of :meth:`ProjectionChecker.is_free`.

    Returns True when the pose is collision-free. Build a
    :class:`ProjectionChecker` once instead when checking many poses of
    the same scene.
    """
    return ProjectionChecker(food, proxy, mouth).is_free(food_pose)
