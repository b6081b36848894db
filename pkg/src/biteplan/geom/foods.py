"""Parametric food solids used as planning payloads.

Each builder returns a watertight triangle mesh with outward winding,
axis of symmetry (where one exists) along +y, re-centered so the
volumetric centroid sits at the local origin. The local origin doubles
as the skewer point on the fork.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidSpecError
from .mesh import TriMesh

FOOD_KINDS = ("carrot", "cantaloupe", "celery", "strawberry")

DEFAULT_DIMENSIONS: dict[str, dict[str, float]] = {
    "carrot": {"radius": 0.006, "height": 0.05},
    "cantaloupe": {"top_width": 0.03, "bottom_width": 0.02,
                   "height": 0.025, "length": 0.035},
    "celery": {"outer_radius": 0.012, "wall_thickness": 0.005,
               "height": 0.05},
    "strawberry": {"radius": 0.015, "height": 0.035},
}

_REQUIRED_KEYS = {k: tuple(sorted(v)) for k, v in DEFAULT_DIMENSIONS.items()}


@dataclass(frozen=True)
class FoodSpec:
    """Declarative description of one food item.

    ``dimensions`` is a kind-specific map, all entries in meters and
    strictly positive. ``segments`` controls tessellation of curved
    surfaces (subdivisions per full revolution).
    """

    kind: str
    dimensions: dict[str, float] = field(default_factory=dict)
    segments: int = 32

    def __post_init__(self):
        if self.kind not in FOOD_KINDS:
            raise InvalidSpecError(
                f"unknown food kind {self.kind!r}; expected one of {FOOD_KINDS}")
        dims = dict(DEFAULT_DIMENSIONS[self.kind])
        extra = set(self.dimensions) - set(dims)
        if extra:
            raise InvalidSpecError(
                f"{self.kind}: unexpected dimension keys {sorted(extra)}")
        dims.update(self.dimensions)
        for key, val in dims.items():
            if not (float(val) > 0.0):
                raise InvalidSpecError(
                    f"{self.kind}: dimension {key} must be positive, got {val}")
        if self.segments < 8:
            raise InvalidSpecError("segments must be at least 8")
        if self.kind == "celery" and dims["wall_thickness"] > dims["outer_radius"]:
            raise InvalidSpecError(
                "celery wall thickness cannot exceed the outer radius")
        object.__setattr__(self, "dimensions", dims)

    def scaled(self, factor: float) -> "FoodSpec":
        """Uniformly scaled copy (lengths multiply by ``factor``)."""
        return FoodSpec(self.kind,
                        {k: v * factor for k, v in self.dimensions.items()},
                        self.segments)


def make_food_mesh(spec: FoodSpec) -> TriMesh:
    """Build the solid for ``spec``, centered at its volumetric centroid."""
    builder = {
        "carrot": _carrot,
        "cantaloupe": _cantaloupe,
        "celery": _celery,
        "strawberry": _strawberry,
    }[spec.kind]
    mesh = builder(spec.dimensions, spec.segments)
    return TriMesh(mesh.vertices - mesh.centroid, mesh.faces)


# -- generic solids (also used for the robot proxy bodies) ---------------

def make_cylinder_mesh(radius: float, height: float,
                       segments: int = 32) -> TriMesh:
    """Right circular cylinder along +y, centered at the origin."""
    if radius <= 0.0 or height <= 0.0:
        raise InvalidSpecError("cylinder dimensions must be positive")
    return _carrot({"radius": radius, "height": height}, segments)


def make_box_mesh(extents) -> TriMesh:
    """Axis-aligned box centered at the origin.

    ``extents`` are the full side lengths along x, y, z.
    """
    ex, ey, ez = (float(v) / 2.0 for v in extents)
    if ex <= 0.0 or ey <= 0.0 or ez <= 0.0:
        raise InvalidSpecError("box extents must be positive")
    verts = np.array([
        [-ex, -ey, -ez], [ex, -ey, -ez], [ex, ey, -ez], [-ex, ey, -ez],
        [-ex, -ey, ez], [ex, -ey, ez], [ex, ey, ez], [-ex, ey, ez],
    ])
    quads = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
             (2, 3, 7, 6), (0, 4, 7, 3), (1, 2, 6, 5)]
    faces = []
    for (q0, q1, q2, q3) in quads:
        faces += [(q0, q1, q2), (q0, q2, q3)]
    return TriMesh(verts, faces)


# -- builders ------------------------------------------------------------

def _ring(radius: float, y: float, segments: int) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    return np.column_stack([radius * np.cos(t),
                            np.full(segments, y),
                            radius * np.sin(t)])


def _band(lower: np.ndarray, upper: np.ndarray) -> list:
    """Outward-wound side faces between two same-size vertex rings
    (index offsets), lower ring first."""
    s = len(lower)
    faces = []
    for k in range(s):
        a, b = lower[k], lower[(k + 1) % s]
        c, d = upper[k], upper[(k + 1) % s]
        faces += [(a, c, d), (a, d, b)]
    return faces


def _carrot(dims, segments) -> TriMesh:
    r, h = dims["radius"], dims["height"]
    bot = _ring(r, -h / 2.0, segments)
    top = _ring(r, +h / 2.0, segments)
    verts = np.vstack([bot, top,
                       [[0.0, -h / 2.0, 0.0]], [[0.0, h / 2.0, 0.0]]])
    bot_i = np.arange(segments)
    top_i = np.arange(segments) + segments
    cb, ct = 2 * segments, 2 * segments + 1
    faces = _band(bot_i, top_i)
    for k in range(segments):
        faces.append((cb, bot_i[k], bot_i[(k + 1) % segments]))
        faces.append((ct, top_i[(k + 1) % segments], top_i[k]))
    return TriMesh(verts, faces)


def _cantaloupe(dims, segments) -> TriMesh:
    wt, wb = dims["top_width"], dims["bottom_width"]
    hh, ll = dims["height"] / 2.0, dims["length"] / 2.0
    # trapezoid in the xz-plane, counterclockwise
    poly = np.array([[-wb / 2.0, -hh], [wb / 2.0, -hh],
                     [wt / 2.0, +hh], [-wt / 2.0, +hh]])
    n = len(poly)
    near = np.column_stack([poly[:, 0], np.full(n, -ll), poly[:, 1]])
    far = np.column_stack([poly[:, 0], np.full(n, +ll), poly[:, 1]])
    verts = np.vstack([near, far])
    near_i = np.arange(n)
    far_i = np.arange(n) + n
    faces = _band(near_i, far_i)
    # convex end caps as fans; near cap faces -y, far cap +y
    for k in range(1, n - 1):
        faces.append((near_i[0], near_i[k], near_i[k + 1]))
        faces.append((far_i[0], far_i[k + 1], far_i[k]))
    return TriMesh(verts, faces)


def _celery(dims, segments) -> TriMesh:
    ro, h = dims["outer_radius"], dims["height"]
    ri = ro - dims["wall_thickness"]
    arc_n = max(4, segments // 2)
    theta = np.linspace(0.0, np.pi, arc_n + 1)
    hh = h / 2.0

    def arc(radius, y):
        return np.column_stack([radius * np.cos(theta),
                                np.full(arc_n + 1, y),
                                radius * np.sin(theta)])

    if ri <= 1e-12:
        # solid half cylinder: outer arc plus a flat diameter face
        ob, ot = arc(ro, -hh), arc(ro, +hh)
        verts = np.vstack([ob, ot])
        obi = np.arange(arc_n + 1)
        oti = obi + (arc_n + 1)
        faces = []
        for k in range(arc_n):
            faces += [(obi[k], oti[k], oti[k + 1]), (obi[k], oti[k + 1], obi[k + 1])]
        # flat rectangular face along the diameter (z = 0), normal -z
        a, b = obi[0], obi[arc_n]
        c, d = oti[0], oti[arc_n]
        faces += [(a, b, d), (a, d, c)]
        # end caps: fans over the half disc
        for k in range(1, arc_n):
            faces.append((obi[0], obi[k], obi[k + 1]))
            faces.append((oti[0], oti[k + 1], oti[k]))
        return TriMesh(verts, faces)

    ob, ot = arc(ro, -hh), arc(ro, +hh)
    ib, it = arc(ri, -hh), arc(ri, +hh)
    verts = np.vstack([ob, ot, ib, it])
    m = arc_n + 1
    obi, oti = np.arange(m), np.arange(m) + m
    ibi, iti = np.arange(m) + 2 * m, np.arange(m) + 3 * m
    faces = []
    for k in range(arc_n):
        # outer wall, outward
        faces += [(obi[k], oti[k], oti[k + 1]), (obi[k], oti[k + 1], obi[k + 1])]
        # inner wall, facing the channel
        faces += [(ibi[k], iti[k + 1], iti[k]), (ibi[k], ibi[k + 1], iti[k + 1])]
        # end caps: radial quads between the arcs
        faces += [(obi[k], obi[k + 1], ibi[k + 1]), (obi[k], ibi[k + 1], ibi[k])]
        faces += [(oti[k], iti[k + 1], oti[k + 1]), (oti[k], iti[k], iti[k + 1])]
    # two flat lips where the arcs stop (theta = 0 and pi); both face -z
    for k, flip in ((0, True), (arc_n, False)):
        quad = [obi[k], oti[k], iti[k], ibi[k]]
        if flip:
            quad.reverse()
        faces += [(quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])]
    return TriMesh(verts, faces)


def _strawberry(dims, segments) -> TriMesh:
    r, h = dims["radius"], dims["height"]
    rings_n = max(3, segments // 2)
    t = np.linspace(0.0, np.pi, rings_n + 1)[1:-1]
    profile = np.sin(t) * np.sin(t / 2.0) ** 2
    profile = profile / profile.max() * r
    ys = (h / 2.0) * np.cos(t)          # tip at +y, round base at -y
    rings = [
        _ring(profile[j], ys[j], segments) for j in range(len(t))
    ]
    tip = np.array([[0.0, +h / 2.0, 0.0]])
    base = np.array([[0.0, -h / 2.0, 0.0]])
    verts = np.vstack(rings + [tip, base])
    tip_i = len(verts) - 2
    base_i = len(verts) - 1
    faces = []
    for j in range(len(rings) - 1):
        upper = np.arange(segments) + j * segments
        lower = np.arange(segments) + (j + 1) * segments
        faces += _band(lower, upper)
    first = np.arange(segments)
    last = np.arange(segments) + (len(rings) - 1) * segments
    for k in range(segments):
        faces.append((tip_i, first[(k + 1) % segments], first[k]))
        faces.append((base_i, last[k], last[(k + 1) % segments]))
    return TriMesh(verts, faces)
