"""Triangular sensor footprint under zoom and rotation, plus camera rays.

A footprint is an isosceles triangle with apex at the agent: apex angle
``apex_angle`` and height ``range_m``. Zoom level xi >= 1 rescales to
h' = h*xi and phi' = phi/xi. A configuration is one (rotation, zoom) pair
with its origin-centered rotated vertex set.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

from .geometry import (CONTAINMENT_TOL, ConvexPolygon, HalfPlane, Point2,
                       Segment, halfplanes, rotate)


@dataclass(frozen=True)
class FovParams:
    apex_angle: float  # radians
    range_m: float

    def __post_init__(self) -> None:
        if not 0 < self.apex_angle < math.pi:
            raise ValueError("apex_angle must lie in (0, pi)")
        if self.range_m <= 0:
            raise ValueError("range must be positive")


@dataclass(frozen=True)
class FovConfig:
    """One (rotation, zoom) footprint; index is the 1-based label in the
    enumeration order (zoom-major) used in exports and hashes."""

    index: int
    theta: float
    zoom: float
    base_vertices: tuple[Point2, Point2, Point2]  # origin-centered, rotated


@dataclass(frozen=True)
class CameraRaySet:
    rays: tuple[Segment, ...]


def base_vertices(f: FovParams, zoom: float) -> tuple[Point2, Point2, Point2]:
    """Unrotated origin-centered vertices (apex, left base, right base)."""
    if zoom < 1:
        raise ValueError("zoom must be >= 1")
    h = f.range_m * zoom
    phi = f.apex_angle / zoom
    side = h / math.cos(phi / 2)
    base = 2 * side * math.sin(phi / 2)
    return (Point2(0.0, 0.0), Point2(-base / 2, -h), Point2(base / 2, -h))


def enumerate_configs(angles: Sequence[float], zooms: Sequence[float],
                      f: FovParams) -> list[FovConfig]:
    """All (theta, zoom) pairs, zoom-major, angles in the given order."""
    if not angles or not zooms:
        raise ValueError("angles and zooms must be nonempty")
    configs: list[FovConfig] = []
    idx = 1
    for zoom in zooms:
        verts = base_vertices(f, zoom)
        for theta in angles:
            rotated = tuple(rotate(v, theta) for v in verts)
            configs.append(FovConfig(idx, theta, zoom, rotated))
            idx += 1
    return configs


def place(c: FovConfig, pos: Point2) -> ConvexPolygon:
    """Footprint triangle translated to the agent position."""
    return ConvexPolygon(tuple(Point2(v.x + pos.x, v.y + pos.y)
                               for v in c.base_vertices))


def config_halfplanes(c: FovConfig) -> tuple[HalfPlane, ...]:
    """Half-planes of the origin-centered footprint.

    Because placement is a pure translation, a point p is inside the placed
    footprint at agent position x iff every half-plane contains p - x; the
    normals and offsets are constant per configuration.
    """
    return ConvexPolygon(c.base_vertices).halfplanes


def fov_contains(hps: Sequence[HalfPlane], pos: Point2, p: Point2,
                 tol: float = CONTAINMENT_TOL) -> bool:
    """Containment of p in the footprint placed at pos, via origin half-planes."""
    rel = Point2(p.x - pos.x, p.y - pos.y)
    return all(h.value(rel) <= tol for h in hps)


def rays(c: FovConfig, pos: Point2, count: int) -> CameraRaySet:
    """Camera rays from pos to `count` evenly spaced points on the placed base,
    inclusive of both base corners."""
    if count < 2:
        raise ValueError("need at least 2 rays")
    b1 = Point2(c.base_vertices[1].x + pos.x, c.base_vertices[1].y + pos.y)
    b2 = Point2(c.base_vertices[2].x + pos.x, c.base_vertices[2].y + pos.y)
    out = []
    for i in range(count):
        f = i / (count - 1)
        end = Point2(b1.x + f * (b2.x - b1.x), b1.y + f * (b2.y - b1.y))
        out.append(Segment(pos, end))
    return CameraRaySet(tuple(out))


def config_set_hash(configs: Sequence[FovConfig], ray_count: int) -> str:
    """Stable identity of the configuration set, for table cache validation."""
    h = hashlib.sha256()
    h.update(f"rays={ray_count}".encode())
    for c in configs:
        h.update(f"|{c.index};{c.theta.hex()};{c.zoom.hex()}".encode())
        for v in c.base_vertices:
            h.update(f";{v.x.hex()},{v.y.hex()}".encode())
    return h.hexdigest()[:16]
