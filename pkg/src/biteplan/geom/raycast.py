"""Forward ray casting from the face plane.

A regular grid of ray origins on the mouth's face plane fires along the
outward axis (+z in the mouth frame). Because every ray is parallel to
+z, intersection reduces to a 2D point-in-triangle test in the face
plane plus a barycentric depth lookup, which vectorizes over the whole
grid at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidSpecError
from .mesh import TriMesh
from .mouth import MouthModel
from .pose import Pose

_DEGENERATE_AREA = 1e-18


@dataclass(frozen=True)
class RayGridConfig:
    """Shape of the comfort sampling grid.

    ``grid_n`` x ``grid_m`` ray origins cover a centered
    ``extent`` x ``extent`` square on the face plane; hits farther than
    ``z_max`` along the outward axis are ignored.
    """

    grid_n: int = 16
    grid_m: int = 16
    extent: float = 0.4
    z_max: float = 0.5

    def __post_init__(self):
        if self.grid_n < 1 or self.grid_m < 1:
            raise InvalidSpecError("ray grid needs at least one ray per axis")
        if self.extent <= 0.0 or self.z_max <= 0.0:
            raise InvalidSpecError("ray grid extent and z_max must be positive")

    def origins(self) -> np.ndarray:
        """Grid origins (n*m, 2) in mouth-frame (x, y), x-major order."""
        xs = np.linspace(-self.extent / 2.0, self.extent / 2.0, self.grid_n)
        ys = np.linspace(-self.extent / 2.0, self.extent / 2.0, self.grid_m)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


class GridRaycaster:
    """Reusable caster for a fixed mouth and grid.

    The inner loop runs on preallocated (triangles x rays) buffers with
    in-place arithmetic; this sits on the planner's hot path.
    """

    def __init__(self, mouth: MouthModel, config: RayGridConfig | None = None):
        self.mouth = mouth
        self.config = config or RayGridConfig()
        self._grid = self.config.origins()
        inv = mouth.pose.inverse()
        self._rot = inv.rotation_matrix
        self._off = inv.translation
        self._cap = 0
        self._bufs: list[np.ndarray] = []

    def _work(self, t: int) -> list[np.ndarray]:
        if t > self._cap:
            self._cap = max(t, 2 * self._cap)
            g = len(self._grid)
            self._bufs = [np.empty((self._cap, g)) for _ in range(4)]
            self._bufs.append(np.empty((self._cap, g), dtype=bool))
            self._bufs.append(np.empty((self._cap, g), dtype=bool))
        return [b[:t] for b in self._bufs]

    def cast_local(self, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cast against triangles already in the mouth frame.

        Parameters
        ----------
        triangles : (t, 3, 3) array

        Returns
        -------
        hit : (n*m,) bool
        points : (n*m, 3) float, mouth frame; rows without a hit are NaN.
        """
        g = self._grid
        n_rays = len(g)
        points = np.full((n_rays, 3), np.nan)
        hit = np.zeros(n_rays, dtype=bool)
        if triangles.size == 0:
            return hit, points

        # prune triangles that cannot reach the grid or the z range
        t2 = triangles[:, :, :2]
        tz = triangles[:, :, 2]
        half = self.config.extent / 2.0
        keep = ((tz.max(axis=1) >= 0.0) & (tz.min(axis=1) <= self.config.z_max)
                & (t2[:, :, 0].min(axis=1) <= half)
                & (t2[:, :, 0].max(axis=1) >= -half)
                & (t2[:, :, 1].min(axis=1) <= half)
                & (t2[:, :, 1].max(axis=1) >= -half))
        if not keep.any():
            return hit, points
        t2 = t2[keep]
        tz = tz[keep]
        t = len(t2)

        gx = g[:, 0]
        gy = g[:, 1]
        s0, s1, s2, zbuf, pos, neg = self._work(t)

        # edge function s = (bx-ax)*(gy-ay) - (by-ay)*(gx-ax), expanded so
        # each (t x rays) pass is a single fused outer product
        def edge(a, b, out):
            dx = b[:, 0] - a[:, 0]
            dy = b[:, 1] - a[:, 1]
            np.multiply.outer(dx, gy, out=out)
            out -= np.multiply.outer(dy, gx)
            out += (dy * a[:, 0] - dx * a[:, 1])[:, None]
            return out

        p0, p1, p2 = t2[:, 0], t2[:, 1], t2[:, 2]
        edge(p0, p1, s0)   # twice area of (p0, p1, g): barycentric of v2
        edge(p1, p2, s1)   # -> v0
        edge(p2, p0, s2)   # -> v1

        total = s0[:, 0] + s1[:, 0] + s2[:, 0]   # twice the triangle area
        np.greater_equal(s0, 0.0, out=pos)
        pos &= s1 >= 0.0
        pos &= s2 >= 0.0
        np.less_equal(s0, 0.0, out=neg)
        neg &= s1 <= 0.0
        neg &= s2 <= 0.0
        pos |= neg                                # inside, either winding
        pos &= (np.abs(total) > _DEGENERATE_AREA)[:, None]

        np.multiply(s1, tz[:, 0][:, None], out=zbuf)
        s2 *= tz[:, 1][:, None]
        zbuf += s2
        s0 *= tz[:, 2][:, None]
        zbuf += s0
        with np.errstate(invalid="ignore", divide="ignore"):
            zbuf /= total[:, None]
        pos &= zbuf >= -1e-12
        pos &= zbuf <= self.config.z_max
        np.logical_not(pos, out=neg)
        zbuf[neg] = np.inf
        z_best = zbuf.min(axis=0)
        np.isfinite(z_best, out=hit)
        points[hit, 0] = g[hit, 0]
        points[hit, 1] = g[hit, 1]
        points[hit, 2] = np.maximum(z_best[hit], 0.0)
        return hit, points

    def cast(self, meshes) -> tuple[np.ndarray, np.ndarray]:
        """Cast against world-frame meshes (transformed in here)."""
        tris = []
        for m in meshes:
            if len(m.faces):
                v = m.vertices @ self._rot.T + self._off
                tris.append(v[m.faces])
        if not tris:
            return self.cast_local(np.zeros((0, 3, 3)))
        return self.cast_local(np.vstack(tris))


def raycast_grid(meshes, mouth: MouthModel,
                 config: RayGridConfig | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Cast the comfort grid against world-frame meshes.

    Returns ``(hit_mask, points)`` with points in the mouth frame; see
    :meth:`GridRaycaster.cast_local`.
    """
    return GridRaycaster(mouth, config).cast(meshes)
