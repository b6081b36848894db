"""Rigid-body poses built on unit quaternions.

Quaternions are stored scalar-first ``(w, x, y, z)`` and kept normalized.
A :class:`Pose` maps points from its local frame into the parent frame:
``x_parent = R(q) @ x_local + t``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import InvalidSpecError

_UNIT_TOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return ``q`` scaled to unit norm with a canonical sign.

    The sign is chosen so the first nonzero component is positive, which
    makes serialized poses reproducible byte for byte.
    """
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise InvalidSpecError("quaternion norm is numerically zero")
    q = q / n
    for c in q:
        if c != 0.0:
            if c < 0.0:
                q = -q
            break
    return q


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a * b`` (apply ``b`` first, then ``a``)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise InvalidSpecError("rotation axis has zero length")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis / n
    return quat_normalize(q)


def quat_from_two_vectors(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """Minimal rotation taking direction ``a`` onto direction ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise InvalidSpecError("direction vector has zero length")
    a, b = a / na, b / nb
    d = float(np.dot(a, b))
    if d > 1.0 - 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    if d < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis orthogonal to a
        helper = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        return quat_from_axis_angle(axis, np.pi)
    axis = np.cross(a, b)
    q = np.empty(4)
    q[0] = 1.0 + d
    q[1:] = axis
    return quat_normalize(q)


def quat_rotate(q: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rotate one point or an ``(n, 3)`` stack of points by ``q``."""
    return np.asarray(points, dtype=np.float64) @ quat_to_matrix(q).T


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle in radians between two unit quaternions.

    Antipodal quaternions encode the same rotation, so the dot product is
    folded with ``abs`` before the arccos.
    """
    d = abs(float(np.dot(a, b)))
    return 2.0 * np.arccos(min(d, 1.0))


def quat_slerp(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """Spherical interpolation from ``a`` (s=0) to ``b`` (s=1) along the
    shorter arc."""
    d = float(np.dot(a, b))
    if d < 0.0:
        b = -b
        d = -d
    if d > 1.0 - 1e-10:
        # nearly identical: linear blend then renormalize
        return quat_normalize(a + s * (b - a))
    theta = np.arccos(min(d, 1.0))
    st = np.sin(theta)
    return quat_normalize((np.sin((1.0 - s) * theta) / st) * a
                          + (np.sin(s * theta) / st) * b)


def random_quat(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (Shoemake's subgroup algorithm)."""
    u1, u2, u3 = rng.random(3)
    r1, r2 = np.sqrt(1.0 - u1), np.sqrt(u1)
    t1, t2 = 2.0 * np.pi * u2, 2.0 * np.pi * u3
    return quat_normalize(np.array([
        r2 * np.cos(t2), r1 * np.sin(t1), r1 * np.cos(t1), r2 * np.sin(t2),
    ]))


class Pose:
    """Immutable rigid transform (rotation + translation).

    Parameters
    ----------
    translation : (3,) array-like, meters
    quaternion : (4,) array-like, scalar-first ``(w, x, y, z)``.
        Normalized (and sign-canonicalized) on construction; a norm that
        is numerically zero raises :class:`InvalidSpecError`.
    """

    __slots__ = ("translation", "quaternion", "_matrix")

    def __init__(self, translation: Sequence[float],
                 quaternion: Sequence[float] = (1.0, 0.0, 0.0, 0.0)):
        t = np.array(translation, dtype=np.float64).reshape(3)
        q = quat_normalize(np.array(quaternion, dtype=np.float64).reshape(4))
        t.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "quaternion", q)
        object.__setattr__(self, "_matrix", None)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    # pickling must bypass both immutability and constructor
    # renormalization so a pose round-trips bit for bit
    def __getstate__(self):
        return (self.translation, self.quaternion)

    def __setstate__(self, state):
        t, q = state
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "quaternion", q)
        object.__setattr__(self, "_matrix", None)

    # -- constructors -------------------------------------------------

    @classmethod
    def identity(cls) -> "Pose":
        return cls((0.0, 0.0, 0.0))

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float,
                        translation: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        return cls(translation, quat_from_axis_angle(axis, angle))

    # -- core algebra --------------------------------------------------

    @property
    def rotation_matrix(self) -> np.ndarray:
        m = object.__getattribute__(self, "_matrix")
        if m is None:
            m = quat_to_matrix(self.quaternion)
            m.flags.writeable = False
            object.__setattr__(self, "_matrix", m)
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map one point or an ``(n, 3)`` stack from local to parent frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation_matrix.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate vectors without translating them."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation_matrix.T

    def compose(self, other: "Pose") -> "Pose":
        """Transform that applies ``other`` first, then ``self``."""
        return Pose(self.apply(other.translation),
                    quat_multiply(self.quaternion, other.quaternion))

    def inverse(self) -> "Pose":
        qinv = quat_conjugate(self.quaternion)
        return Pose(-quat_rotate(qinv, self.translation), qinv)

    def interpolate(self, other: "Pose", s: float) -> "Pose":
        """Geodesic blend: linear in translation, slerp in rotation."""
        return Pose(self.translation + s * (other.translation - self.translation),
                    quat_slerp(self.quaternion, other.quaternion, s))

    def matrix(self) -> np.ndarray:
        """Homogeneous 4x4 transform."""
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix
        m[:3, 3] = self.translation
        return m

    # -- misc ----------------------------------------------------------

    def rotation_angle_to(self, other: "Pose") -> float:
        return quat_angle(self.quaternion, other.quaternion)

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (np.allclose(self.translation, other.translation, atol=tol)
                and quat_angle(self.quaternion, other.quaternion) <= tol)

    def to_dict(self) -> dict:
        return {"translation": [float(v) for v in self.translation],
                "quaternion": [float(v) for v in self.quaternion]}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(d["translation"], d["quaternion"])

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.6g}" for v in self.translation)
        q = ", ".join(f"{v:.6g}" for v in self.quaternion)
        return f"Pose(t=[{t}], q=[{q}])"


def poses_to_arrays(poses: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    """Stack translations and quaternions of a pose sequence into
    ``(n, 3)`` and ``(n, 4)`` arrays (empty arrays for an empty input)."""
    if len(poses) == 0:
        return np.zeros((0, 3)), np.zeros((0, 4))
    t = np.stack([p.translation for p in poses])
    q = np.stack([p.quaternion for p in poses])
    return t, q
