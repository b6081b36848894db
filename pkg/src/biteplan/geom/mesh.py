"""Triangle meshes: validation, volume, rigid transforms, plane slicing.

Meshes are triangle-only and indexed. Solid operations (volume, centroid,
slicing) assume a watertight, consistently wound surface with outward
normals; :func:`require_watertight` checks exactly that. Empty meshes
(zero faces) are legal and behave as a solid of volume zero.
"""

from __future__ import annotations

import os
from functools import cached_property
from typing import Sequence

import numpy as np

from ..errors import InvalidPlaneError, TopologyError
from .pose import Pose

# vertex distances within this of the slicing plane are snapped onto it
_PLANE_SNAP = 1e-12


class TriMesh:
    """Indexed triangle mesh with immutable float64/int64 arrays.

    Parameters
    ----------
    vertices : (n, 3) float array-like
    faces : (m, 3) int array-like
        Vertex indices, counterclockwise when viewed from outside.

    Raises
    ------
    TopologyError
        If faces are not triangles, reference out-of-range vertices, or
        repeat a vertex within one face.
    """

    __slots__ = ("vertices", "faces", "__dict__")

    def __init__(self, vertices, faces):
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3).copy()
        f = np.asarray(faces, dtype=np.int64).reshape(-1, 3).copy()
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise TopologyError(
                    f"face index out of range (have {len(v)} vertices)")
            degenerate = ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2])
                          | (f[:, 0] == f[:, 2]))
            if degenerate.any():
                raise TopologyError(
                    f"{int(degenerate.sum())} faces repeat a vertex")
        v.flags.writeable = False
        f.flags.writeable = False
        self.vertices = v
        self.faces = f

    # cached derived arrays -------------------------------------------

    @cached_property
    def triangles(self) -> np.ndarray:
        """Face corner coordinates, shape (m, 3, 3)."""
        t = self.vertices[self.faces]
        t.flags.writeable = False
        return t

    @cached_property
    def volume(self) -> float:
        """Signed enclosed volume (positive for outward winding)."""
        if not len(self.faces):
            return 0.0
        t = self.triangles
        # divergence theorem: sum of signed tetrahedra against the origin
        return float(np.einsum("ij,ij->i", t[:, 0],
                               np.cross(t[:, 1], t[:, 2])).sum() / 6.0)

    @cached_property
    def centroid(self) -> np.ndarray:
        """Volume-weighted centroid of the enclosed solid."""
        if not len(self.faces):
            return np.zeros(3)
        t = self.triangles
        w = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])) / 6.0
        vol = w.sum()
        if abs(vol) < 1e-30:
            # degenerate shell: fall back to the vertex mean
            return self.vertices.mean(axis=0)
        c = (t.sum(axis=1) / 4.0 * w[:, None]).sum(axis=0) / vol
        c.flags.writeable = False
        return c

    @cached_property
    def bounding_radius(self) -> float:
        """Radius of the smallest origin-centered sphere holding all
        vertices."""
        if not len(self.vertices):
            return 0.0
        return float(np.sqrt((self.vertices ** 2).sum(axis=1).max()))

    def __repr__(self):
        return f"TriMesh({len(self.vertices)} vertices, {len(self.faces)} faces)"


def mesh_volume(mesh: TriMesh) -> float:
    """Enclosed volume of a closed, consistently wound surface.

    Use the :attr:`TriMesh.volume` property directly on meshes already
    known to be closed (e.g. slicer output) to skip the topology check.
    """
    require_watertight(mesh)
    return mesh.volume


def transform_mesh(mesh: TriMesh, pose: Pose) -> TriMesh:
    """Rigidly transform a mesh into the parent frame of ``pose``."""
    return TriMesh(pose.apply(mesh.vertices), mesh.faces)


def concatenate_meshes(meshes: Sequence[TriMesh]) -> TriMesh:
    """Union of disjoint meshes as one (possibly disconnected) mesh."""
    parts = [m for m in meshes if len(m.faces)]
    if not parts:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, base = [], [], 0
    for m in parts:
        verts.append(m.vertices)
        faces.append(m.faces + base)
        base += len(m.vertices)
    return TriMesh(np.vstack(verts), np.vstack(faces))


# -- watertightness -----------------------------------------------------

def watertight_report(mesh: TriMesh) -> dict:
    """Count structural defects of the surface.

    A closed orientable surface with consistent winding has every
    directed edge appearing exactly once and its reverse exactly once.
    """
    f = mesh.faces
    if not len(f):
        return {"boundary_edges": 0, "nonmanifold_edges": 0}
    directed = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    lo = directed.min(axis=1)
    hi = directed.max(axis=1)
    undirected = lo * (mesh.vertices.shape[0] + 1) + hi
    order = np.argsort(undirected, kind="stable")
    _, counts = np.unique(undirected[order], return_counts=True)
    boundary = int((counts == 1).sum())
    nonmanifold = int((counts > 2).sum())
    winding = 0
    if boundary == 0 and nonmanifold == 0:
        # paired edges must run in opposite directions
        d_sorted = directed[order]
        a = d_sorted[0::2]
        b = d_sorted[1::2]
        winding = int((~((a[:, 0] == b[:, 1]) & (a[:, 1] == b[:, 0]))).sum())
    return {"boundary_edges": boundary,
            "nonmanifold_edges": nonmanifold,
            "winding_violations": winding}


def is_watertight(mesh: TriMesh) -> bool:
    r = watertight_report(mesh)
    return (r["boundary_edges"] == 0 and r["nonmanifold_edges"] == 0
            and r.get("winding_violations", 0) == 0)


def require_watertight(mesh: TriMesh, context: str = "mesh") -> None:
    r = watertight_report(mesh)
    if (r["boundary_edges"] or r["nonmanifold_edges"]
            or r.get("winding_violations", 0)):
        raise TopologyError(
            f"{context} is not a closed oriented surface: "
            f"{r['boundary_edges']} boundary edges, "
            f"{r['nonmanifold_edges']} nonmanifold edges, "
            f"{r.get('winding_violations', 0)} winding violations")


# -- plane slicing ------------------------------------------------------

def _empty_mesh() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


class _PieceBuilder:
    """Accumulates one side of a slice and closes it with a planar cap."""

    def __init__(self, vertices: np.ndarray):
        self.vertices = vertices
        self.extra: list[np.ndarray] = []   # intersection points
        self.faces: list = []
        self.segments: list = []            # (a, b) directed cut edges
        self._next = len(vertices)

    def new_vertex(self, p: np.ndarray) -> int:
        self.extra.append(p)
        self._next += 1
        return self._next - 1

    def add_face(self, a: int, b: int, c: int) -> None:
        self.faces.append((a, b, c))

    def add_segment(self, a: int, b: int) -> None:
        if a != b:
            self.segments.append((a, b))

    def build(self) -> TriMesh:
        if not self.faces:
            return _empty_mesh()
        verts = (np.vstack([self.vertices] + [np.asarray(self.extra)])
                 if self.extra else self.vertices)
        faces = np.asarray(self.faces, dtype=np.int64)
        if self.segments:
            seg = np.asarray(self.segments, dtype=np.int64)
            ref_pt = verts[np.unique(seg)].mean(axis=0)
            ref = len(verts)
            verts = np.vstack([verts, ref_pt[None, :]])
            # one fan triangle per cut edge, reversed so the cap closes
            # the open boundary with matching winding
            cap = np.column_stack([np.full(len(seg), ref, dtype=np.int64),
                                   seg[:, 1], seg[:, 0]])
            faces = np.vstack([faces, cap])
        used = np.unique(faces)
        remap = np.full(len(verts), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return TriMesh(verts[used], remap[faces])


def slice_mesh_by_plane(mesh: TriMesh, point, normal) -> tuple[TriMesh, TriMesh]:
    """Split a watertight mesh by the plane through ``point`` with
    ``normal``, returning ``(inside, outside)``.

    "Inside" is the closed half-space opposite the normal:
    ``(x - point) . normal <= 0``. Both pieces are closed with a planar
    cap triangulated as a fan, so each piece is watertight on its own and
    their volumes sum to the input volume. On-plane vertices belong to
    whichever pieces their triangles land in.

    Raises
    ------
    InvalidPlaneError
        If the normal has (numerically) zero length.
    """
    point = np.asarray(point, dtype=np.float64).reshape(3)
    normal = np.asarray(normal, dtype=np.float64).reshape(3)
    n_len = np.linalg.norm(normal)
    if n_len < 1e-12:
        raise InvalidPlaneError("slicing plane normal has zero length")
    normal = normal / n_len

    if not len(mesh.faces):
        return _empty_mesh(), _empty_mesh()

    d = (mesh.vertices - point) @ normal
    d = np.where(np.abs(d) <= _PLANE_SNAP, 0.0, d)
    fd = d[mesh.faces]                       # (m, 3) corner distances
    below = (fd <= 0.0).all(axis=1)
    above = (fd >= 0.0).all(axis=1)
    coplanar = below & above
    whole_in = below & ~coplanar
    whole_out = above & ~coplanar
    crossing = ~(below | above)

    inside = _PieceBuilder(mesh.vertices)
    outside = _PieceBuilder(mesh.vertices)
    for (a, b, c) in mesh.faces[whole_in]:
        inside.add_face(a, b, c)
    for (a, b, c) in mesh.faces[whole_out]:
        outside.add_face(a, b, c)

    # intersection points are created once per mesh edge so both walls
    # and both caps share identical coordinates; the two builders
    # allocate in lockstep, so one id serves both
    nv = len(mesh.vertices)
    cut_cache: dict[tuple[int, int], int] = {}

    def cut_point(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        got = cut_cache.get(key)
        if got is not None:
            return got
        t = d[key[0]] / (d[key[0]] - d[key[1]])
        p = mesh.vertices[key[0]] + t * (mesh.vertices[key[1]]
                                         - mesh.vertices[key[0]])
        pid = inside.new_vertex(p)
        outside.new_vertex(p)
        cut_cache[key] = pid
        return pid

    def emit(builder: _PieceBuilder, loop: list[int]) -> None:
        # loop is a convex sub-polygon in the original winding
        for k in range(1, len(loop) - 1):
            builder.add_face(loop[0], loop[k], loop[k + 1])
        if len(loop) < 3:
            return
        m = len(loop)
        for k in range(m):
            a, b = loop[k], loop[(k + 1) % m]
            if ((a >= nv or d[a] == 0.0) and (b >= nv or d[b] == 0.0)):
                builder.add_segment(a, b)
                return

    for face in mesh.faces[crossing]:
        loop_in: list[int] = []
        loop_out: list[int] = []
        for k in range(3):
            i, j = int(face[k]), int(face[(k + 1) % 3])
            di, dj = d[i], d[j]
            if di <= 0.0:
                loop_in.append(i)
            if di >= 0.0:
                loop_out.append(i)
            if di * dj < 0.0:
                pid = cut_point(i, j)
                loop_in.append(pid)
                loop_out.append(pid)
        emit(inside, loop_in)
        emit(outside, loop_out)

    # an edge of an uncut triangle can lie in the plane; it seals the cap
    # only where the solid actually stops at the plane
    _collect_flush_edges(mesh, d, whole_in, whole_out, coplanar,
                         inside, outside)
    return inside.build(), outside.build()


def _collect_flush_edges(mesh, d, whole_in, whole_out, coplanar,
                         inside: _PieceBuilder, outside: _PieceBuilder) -> None:
    on_plane = d == 0.0
    candidates = []
    for side, kept in ((inside, whole_in), (outside, whole_out)):
        for fi in np.nonzero(kept)[0]:
            face = mesh.faces[fi]
            flags = on_plane[face]
            if flags.sum() == 2:
                for k in range(3):
                    i, j = int(face[k]), int(face[(k + 1) % 3])
                    if on_plane[i] and on_plane[j]:
                        candidates.append((side, kept, i, j))
    if not candidates:
        return
    # adjacency over undirected edges, built only when needed
    owner: dict[tuple[int, int], list[int]] = {}
    for fi, face in enumerate(mesh.faces):
        for k in range(3):
            i, j = int(face[k]), int(face[(k + 1) % 3])
            owner.setdefault((min(i, j), max(i, j)), []).append(fi)
    for side, kept, i, j in candidates:
        neighbors = owner.get((min(i, j), max(i, j)), [])
        # the edge seals this piece only where the solid actually stops:
        # its partner face must sit on the other side (or lie flat in the
        # plane), not on the same side
        if sum(1 for fi in neighbors if kept[fi]) > 1:
            continue
        partner_elsewhere = any(not kept[fi] for fi in neighbors)
        if partner_elsewhere:
            side.add_segment(i, j)


# -- OBJ I/O -------------------------------------------------------------

def save_obj(mesh: TriMesh, path: str | os.PathLike) -> None:
    """Write vertex/face records. Floats keep full precision so a
    round-trip reproduces the mesh bit for bit."""
    lines = [f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}" for v in mesh.vertices]
    lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in mesh.faces]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_obj(path: str | os.PathLike) -> TriMesh:
    """Read an OBJ file holding a triangle mesh.

    Only ``v`` and ``f`` records are interpreted; normals, texture
    coordinates, and grouping records are ignored. Faces must be
    triangles; anything else raises :class:`TopologyError`.
    """
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise TopologyError(f"line {lineno}: vertex needs 3 coords")
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    # OBJ indices are 1-based; negatives count from the end
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) != 3:
                    raise TopologyError(
                        f"line {lineno}: only triangle faces are supported "
                        f"(got {len(idx)} vertices)")
                faces.append(idx)
    return TriMesh(np.asarray(verts, dtype=np.float64).reshape(-1, 3),
                   np.asarray(faces, dtype=np.int64).reshape(-1, 3))
