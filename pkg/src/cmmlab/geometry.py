"""Exact 2-D convex geometry: half-plane intersection, area and centroid.

The intersection is built by clipping a large bounding box against each
half-plane in turn. Every edge of the working polygon remembers which
constraint it lies on, so the final vertices are recomputed as exact
line-line intersections rather than accumulated clip points.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

NORMAL_TOL = 1e-12
VERTEX_TOL = 1e-9
AREA_TOL = 1e-12
BOX_SCALE = 1e6


class GeometryError(ValueError):
    pass


class InvalidInputError(GeometryError):
    pass


class RegionNotBoundedError(GeometryError):
    pass


class Vec2(NamedTuple):
    x: float
    y: float

    def dot(self, other: Sequence[float]) -> float:
        return self.x * other[0] + self.y * other[1]

    def norm2(self) -> float:
        return self.x * self.x + self.y * self.y

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def scale(self, s: float) -> Vec2:
        return Vec2(self.x * s, self.y * s)


def unit(angle: float) -> Vec2:
    return Vec2(math.cos(angle), math.sin(angle))


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane ``normal . p <= offset`` with a unit normal."""

    normal: Vec2
    offset: float

    def __post_init__(self):
        nx, ny = self.normal
        if not (math.isfinite(nx) and math.isfinite(ny) and math.isfinite(self.offset)):
            raise InvalidInputError(f"non-finite half-plane {self.normal}, {self.offset}")
        if abs(math.hypot(nx, ny) - 1.0) > NORMAL_TOL:
            raise InvalidInputError(f"normal {self.normal} is not unit length")
        if not isinstance(self.normal, Vec2):
            object.__setattr__(self, "normal", Vec2(float(nx), float(ny)))

    @classmethod
    def from_angle(cls, angle: float, offset: float) -> HalfPlane:
        return cls(unit(angle), float(offset))

    def margin(self, p: Sequence[float]) -> float:
        """Signed distance past the boundary; positive means outside."""
        return self.normal[0] * p[0] + self.normal[1] * p[1] - self.offset


class RegionStatus(enum.Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"
    EMPTY = "empty"


@dataclass(frozen=True)
class ConvexRegion:
    vertices: tuple[Vec2, ...]
    status: RegionStatus
    # index of the constraint each edge lies on; edge k runs vertices[k] -> vertices[k+1]
    edges: tuple[int, ...] = ()

    @property
    def bounded(self) -> bool:
        return self.status is RegionStatus.BOUNDED

    @classmethod
    def empty(cls) -> ConvexRegion:
        return cls((), RegionStatus.EMPTY)

    @classmethod
    def unbounded(cls) -> ConvexRegion:
        return cls((), RegionStatus.UNBOUNDED)


def _line_intersection(a, b):
    """Intersection of lines ``a.n . p = a.o`` and ``b.n . p = b.o``; None if parallel."""
    (ax, ay), ao = a
    (bx, by), bo = b
    det = ax * by - ay * bx
    if abs(det) < 1e-15:
        return None
    return ((ao * by - bo * ay) / det, (ax * bo - bx * ao) / det)


def _clip(verts, labels, line, label, eps):
    """Sutherland-Hodgman step against one half-plane, tracking edge labels."""
    (nx, ny), off = line
    out_v = []
    out_l = []
    k = len(verts)
    d = [nx * v[0] + ny * v[1] - off for v in verts]
    for i in range(k):
        j = i + 1 if i + 1 < k else 0
        ds, de = d[i], d[j]
        s_in = ds <= eps
        e_in = de <= eps
        if s_in:
            out_v.append(verts[i])
            out_l.append(labels[i])
            if not e_in:
                s, e = verts[i], verts[j]
                t = ds / (ds - de)
                out_v.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
                out_l.append(label)
        elif e_in:
            s, e = verts[i], verts[j]
            t = ds / (ds - de)
            out_v.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            out_l.append(labels[i])
    return out_v, out_l


def _validate(constraints: Sequence[HalfPlane]) -> None:
    if len(constraints) == 0:
        raise InvalidInputError("need at least one half-plane")
    for c in constraints:
        if not isinstance(c, HalfPlane):
            raise InvalidInputError(f"expected HalfPlane, got {type(c).__name__}")


def intersect_halfplanes(constraints: Sequence[HalfPlane]) -> ConvexRegion:
    """Intersect closed half-planes into a convex polygon.

    Returns a region whose status is BOUNDED (non-empty and finite, vertices
    counter-clockwise), UNBOUNDED or EMPTY. Edge labels index ``constraints``.
    """
    _validate(constraints)
    scale = max(max(abs(c.offset) for c in constraints), 1.0)
    half = 0.5 * BOX_SCALE * scale
    eps = NORMAL_TOL * scale
    # box sides get labels -1..-4
    box_lines = [((1.0, 0.0), half), ((0.0, 1.0), half), ((-1.0, 0.0), half), ((0.0, -1.0), half)]
    verts = [(half, -half), (half, half), (-half, half), (-half, -half)]
    labels = [-1, -2, -3, -4]
    lines = [(c.normal, c.offset) for c in constraints]

    for idx, line in enumerate(lines):
        verts, labels = _clip(verts, labels, line, idx, eps)
        if len(verts) < 3:
            return ConvexRegion.empty()

    def line_of(lab):
        return lines[lab] if lab >= 0 else box_lines[-lab - 1]

    verts, labels = _tidy(verts, labels, line_of)
    if len(verts) < 3:
        return ConvexRegion.empty()
    if _shoelace(verts)[0] < AREA_TOL:
        return ConvexRegion.empty()
    if any(lab < 0 for lab in labels):
        return ConvexRegion.unbounded()
    return ConvexRegion(tuple(Vec2(*v) for v in verts), RegionStatus.BOUNDED, tuple(labels))


def _tidy(verts, labels, line_of):
    """Drop zero-length edges and recompute vertices from their two lines."""
    changed = True
    while changed and len(verts) >= 3:
        changed = False
        k = len(verts)
        for i in range(k):
            j = (i + 1) % k
            if math.dist(verts[i], verts[j]) <= VERTEX_TOL or _parallel(line_of(labels[i - 1]), line_of(labels[i])):
                # edge i collapses; vertex i is redefined by its neighbours' lines
                del verts[i]
                del labels[i]
                changed = True
                break
        if not changed:
            fresh = []
            for i in range(len(verts)):
                p = _line_intersection(line_of(labels[i - 1]), line_of(labels[i]))
                fresh.append(p if p is not None else verts[i])
            verts = fresh
    return verts, labels


def _parallel(a, b) -> bool:
    (ax, ay), _ = a
    (bx, by), _ = b
    return abs(ax * by - ay * bx) < 1e-15 and ax * bx + ay * by > 0


def _shoelace(verts):
    """Area and centroid of a counter-clockwise polygon, shifted to the first vertex."""
    x0, y0 = verts[0]
    a2 = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(1, len(verts) - 1):
        x1, y1 = verts[i][0] - x0, verts[i][1] - y0
        x2, y2 = verts[i + 1][0] - x0, verts[i + 1][1] - y0
        cross = x1 * y2 - x2 * y1
        a2 += cross
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
    area = 0.5 * a2
    if a2 == 0.0:
        return 0.0, (x0, y0)
    return area, (x0 + cx / (3.0 * a2), y0 + cy / (3.0 * a2))


def area_and_centroid(region: ConvexRegion) -> tuple[float, Vec2]:
    if region.status is not RegionStatus.BOUNDED:
        raise RegionNotBoundedError(f"region is {region.status.value}")
    area, (cx, cy) = _shoelace(region.vertices)
    return area, Vec2(cx, cy)


def contains(constraints: Sequence[HalfPlane], point: Sequence[float]) -> bool:
    """True iff ``point`` satisfies every constraint; the boundary counts as inside."""
    return all(c.margin(point) <= 0.0 for c in constraints)


def bounding_box(region: ConvexRegion) -> tuple[float, float, float, float]:
    """(xmin, xmax, ymin, ymax) of a bounded region."""
    if region.status is not RegionStatus.BOUNDED:
        raise RegionNotBoundedError(f"region is {region.status.value}")
    xs = [v.x for v in region.vertices]
    ys = [v.y for v in region.vertices]
    return min(xs), max(xs), min(ys), max(ys)
