"""Exact 2D primitives: rotation, segment intersection, ray casting, half-planes, hulls.

Angles are radians everywhere in this package; degrees appear only in scenario
files. Containment tests are non-strict with an absolute tolerance of 1e-9 m,
so boundary points count as inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

# Determinant magnitude below which a ray/segment pair is treated as parallel.
PARALLEL_TOL = 1e-12
# Absolute tolerance for half-plane containment.
CONTAINMENT_TOL = 1e-9
# Minimum admissible segment / polygon-edge length.
DEGENERATE_TOL = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


class Segment(NamedTuple):
    a: Point2
    b: Point2

    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def point_at(self, s: float) -> Point2:
        """Point a + s*(b - a)."""
        return Point2(self.a.x + s * (self.b.x - self.a.x),
                      self.a.y + s * (self.b.y - self.a.y))


class HalfPlane(NamedTuple):
    """Linear inequality with containment semantics normal . x <= offset."""

    normal: tuple[float, float]
    offset: float

    def value(self, p: Point2) -> float:
        """Signed slack normal . p - offset (negative strictly inside)."""
        return self.normal[0] * p.x + self.normal[1] * p.y - self.offset

    def contains(self, p: Point2, tol: float = CONTAINMENT_TOL) -> bool:
        return self.value(p) <= tol


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise convex polygon with at least 3 vertices."""

    vertices: tuple[Point2, ...]

    def __post_init__(self) -> None:
        v = self.vertices
        if len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        n = len(v)
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            if math.hypot(b.x - a.x, b.y - a.y) < DEGENERATE_TOL:
                raise ValueError(f"degenerate edge at vertex {i}")
        area2 = 0.0
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            area2 += a.x * b.y - b.x * a.y
        if area2 <= 0.0:
            raise ValueError("vertices must be in counterclockwise order")
        for i in range(n):
            a, b, c = v[i - 1], v[i], v[(i + 1) % n]
            cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)
            if cross < -CONTAINMENT_TOL:
                raise ValueError(f"reflex vertex at index {i}: polygon not convex")

    @cached_property
    def halfplanes(self) -> tuple[HalfPlane, ...]:
        return tuple(halfplanes(self))

    def centroid(self) -> Point2:
        n = len(self.vertices)
        return Point2(sum(p.x for p in self.vertices) / n,
                      sum(p.y for p in self.vertices) / n)

    def contains(self, p: Point2, tol: float = CONTAINMENT_TOL) -> bool:
        return all(h.value(p) <= tol for h in self.halfplanes)


def rotate(p: Point2, theta: float) -> Point2:
    """Apply the rotation matrix [[cos, sin], [-sin, cos]] to p.

    Note this convention rotates clockwise for positive theta; it is kept
    verbatim so sensor footprints match the rest of the pipeline.
    """
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    c, s = math.cos(theta), math.sin(theta)
    return Point2(c * p.x + s * p.y, -s * p.x + c * p.y)


def segment_intersect(ray: Segment, seg: Segment) -> Optional[tuple[float, float]]:
    """Intersection parameters (s, r) of two segments, both in [0, 1].

    Solves the 2x2 linear system for the ray point ray.a + s*(ray.b - ray.a)
    meeting the segment point seg.a + r*(seg.b - seg.a). Returns None when the
    determinant magnitude is below PARALLEL_TOL (parallel or degenerate) or
    when either parameter falls outside [0, 1].
    """
    dx = ray.b.x - ray.a.x
    dy = ray.b.y - ray.a.y
    ex = seg.a.x - seg.b.x
    ey = seg.a.y - seg.b.y
    rx = seg.a.x - ray.a.x
    ry = seg.a.y - ray.a.y
    det = dx * ey - ex * dy
    if abs(det) < PARALLEL_TOL:
        return None
    s = (rx * ey - ex * ry) / det
    r = (dx * ry - rx * dy) / det
    if 0.0 <= s <= 1.0 and 0.0 <= r <= 1.0:
        return s, r
    return None


def nearest_hit(ray: Segment, segments: Sequence[Segment]) -> Optional[int]:
    """Index of the segment the ray hits at the smallest parameter s.

    Ties within 1e-12 in s go to the lower index; returns None when the ray
    intersects nothing.
    """
    best_i: Optional[int] = None
    best_s = math.inf
    for i, seg in enumerate(segments):
        hit = segment_intersect(ray, seg)
        if hit is not None and hit[0] < best_s - 1e-12:
            best_s = hit[0]
            best_i = i
    return best_i


def halfplanes(poly: ConvexPolygon) -> list[HalfPlane]:
    """One half-plane per polygon edge, oriented so the centroid satisfies all.

    Edge (v1, v2) yields coefficients a = v1.y - v2.y, b = v2.x - v1.x and
    offset c = v2.x*v1.y - v1.x*v2.y for the line a*x + b*y = c; the sign is
    flipped when the centroid violates a*x + b*y <= c. A point lies inside the
    polygon iff it satisfies every returned half-plane.
    """
    cen = poly.centroid()
    out: list[HalfPlane] = []
    n = len(poly.vertices)
    for i in range(n):
        v1, v2 = poly.vertices[i], poly.vertices[(i + 1) % n]
        if math.hypot(v2.x - v1.x, v2.y - v1.y) < DEGENERATE_TOL:
            raise ValueError(f"degenerate edge at vertex {i}")
        a = v1.y - v2.y
        b = v2.x - v1.x
        c = v2.x * v1.y - v1.x * v2.y
        if a * cen.x + b * cen.y > c:
            a, b, c = -a, -b, -c
        out.append(HalfPlane((a, b), c))
    return out


def convex_hull(points: Sequence[Point2]) -> ConvexPolygon:
    """Counterclockwise convex hull via the monotone chain; collinear points dropped.

    Raises ValueError for fewer than 3 distinct points or an all-collinear set.
    """
    pts = sorted(set((p.x, p.y) for p in points))
    if len(pts) < 3:
        raise ValueError("need at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise ValueError("points are collinear: hull is degenerate")
    return ConvexPolygon(tuple(Point2(x, y) for x, y in hull))
