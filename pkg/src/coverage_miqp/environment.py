"""Scenario construction: boundary hulls, surveillance grids, scenario files.

A scenario file is one JSON document; all angles are degrees there and
radians everywhere else. Unknown keys anywhere in the document are an error.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .geometry import (CONTAINMENT_TOL, ConvexPolygon, HalfPlane, Point2,
                       Segment, convex_hull, halfplanes)
from .kinematics import AgentState, ControlInput, KinematicParams, validate_state
from .sensing import FovParams

STRICT_TOL = 1e-9


class ScenarioError(ValueError):
    """Raised for invalid scenario documents or inconsistent field values."""


@dataclass(frozen=True)
class Boundary:
    """Piecewise-linear convex boundary: hull-ordered segments with outward
    half-planes, and the incident segments of every sampled point."""

    points: tuple[Point2, ...]
    segments: tuple[Segment, ...]
    halfplanes: tuple[HalfPlane, ...]
    point_to_segment: tuple[tuple[int, int], ...]
    hull: ConvexPolygon

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class GridCell:
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    halfplanes: tuple[HalfPlane, ...]

    def polygon(self) -> ConvexPolygon:
        xmin, ymin, xmax, ymax = self.bounds
        return ConvexPolygon((Point2(xmin, ymin), Point2(xmax, ymin),
                              Point2(xmax, ymax), Point2(xmin, ymax)))

    def center(self) -> Point2:
        xmin, ymin, xmax, ymax = self.bounds
        return Point2((xmin + xmax) / 2, (ymin + ymax) / 2)

    def contains(self, p: Point2, tol: float = CONTAINMENT_TOL) -> bool:
        return all(h.value(p) <= tol for h in self.halfplanes)


@dataclass(frozen=True)
class Grid:
    cells: tuple[GridCell, ...]
    nx: int
    ny: int
    bounds: tuple[float, float, float, float]

    def __len__(self) -> int:
        return len(self.cells)

    def cells_containing(self, p: Point2) -> list[int]:
        """Indices of every cell whose closed rectangle contains p."""
        return [i for i, c in enumerate(self.cells) if c.contains(p)]

    def cell_of(self, p: Point2) -> Optional[int]:
        """Lowest-index containing cell, None if p is outside the grid."""
        for i, c in enumerate(self.cells):
            if c.contains(p):
                return i
        return None


def bell_curve_points(a: float, b: float, c: float, n: int,
                      x_range: tuple[float, float]) -> list[Point2]:
    """n samples of a*exp(-(x-b)^2 / (2c^2)) at evenly spaced x over x_range."""
    if n < 3:
        raise ValueError("need at least 3 samples")
    if c == 0:
        raise ValueError("width parameter c must be nonzero")
    xs = np.linspace(x_range[0], x_range[1], n)
    return [Point2(float(x), float(a * math.exp(-((x - b) ** 2) / (2 * c * c))))
            for x in xs]


def build_boundary(points: Sequence[Point2]) -> Boundary:
    """Boundary structure of a convex region sampled at its hull vertices.

    Every input point must be a vertex of the convex hull of the input set;
    interior (or collinear, non-vertex) points are rejected because they can
    never be the endpoint of a hull segment.
    """
    hull = convex_hull(points)
    hv = hull.vertices
    n = len(hv)
    segs = tuple(Segment(hv[i], hv[(i + 1) % n]) for i in range(n))
    hps = tuple(halfplanes(hull))

    def match(p: Point2) -> int:
        for i, v in enumerate(hv):
            if math.hypot(p.x - v.x, p.y - v.y) <= STRICT_TOL:
                return i
        raise ScenarioError(f"point ({p.x}, {p.y}) is not a hull vertex")

    incident = []
    for p in points:
        i = match(p)
        incident.append(((i - 1) % n, i))  # segment ending at p, segment starting at p
    return Boundary(tuple(points), segs, hps, tuple(incident), hull)


def build_grid(bounds: tuple[float, float, float, float], nx: int, ny: int) -> Grid:
    """nx*ny equal rectangles tiling bounds exactly; index order is x-major
    within each row, rows bottom to top."""
    if nx < 1 or ny < 1:
        raise ValueError("grid must have at least one cell per axis")
    xmin, ymin, xmax, ymax = bounds
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    cells = []
    for iy in range(ny):
        for ix in range(nx):
            rect = (float(xs[ix]), float(ys[iy]), float(xs[ix + 1]), float(ys[iy + 1]))
            poly = ConvexPolygon((Point2(rect[0], rect[1]), Point2(rect[2], rect[1]),
                                  Point2(rect[2], rect[3]), Point2(rect[0], rect[3])))
            cells.append(GridCell(rect, tuple(halfplanes(poly))))
    return Grid(tuple(cells), nx, ny, tuple(float(v) for v in bounds))


def inside_region(b: Boundary, q: Point2) -> bool:
    """Strict interior test: all outward half-plane inequalities hold strictly.

    Points on the boundary are not interior."""
    return all(h.value(q) < -STRICT_TOL for h in b.halfplanes)


def inside_polygon_strict(poly: ConvexPolygon, q: Point2) -> bool:
    return all(h.value(q) < -STRICT_TOL for h in poly.halfplanes)


@dataclass(frozen=True)
class Scenario:
    """Everything one planning problem needs, immutable once constructed.

    `points` is the coverage target set. For a non-traversable region the
    points are the hull vertices and `boundary` carries the obstacle
    structure; for a traversable region `boundary` is None, nothing occludes,
    and the points may lie anywhere.
    """

    kinematics: KinematicParams
    x0: AgentState
    fov: FovParams
    angles: tuple[float, ...]  # radians
    zooms: tuple[float, ...]
    ray_count: int
    points: tuple[Point2, ...]
    boundary: Optional[Boundary]
    traversable: bool
    grid: Grid
    horizon: int
    weights: tuple[float, float, float]
    big_m: float
    n_s: int
    seed: int
    control_grid: tuple[float, ...]
    time_limit_s: Optional[float]
    max_nodes: Optional[int]
    extra_obstacles: tuple[ConvexPolygon, ...] = field(default=())

    def __post_init__(self) -> None:
        validate_state(self.x0)
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        if self.big_m <= 0:
            raise ScenarioError("big_m must be positive")
        if self.ray_count < 2:
            raise ScenarioError("ray_count must be >= 2")
        if self.n_s < 1:
            raise ScenarioError("visibility n_s must be >= 1")
        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ScenarioError("weights must be finite and nonnegative")
        if not self.points:
            raise ScenarioError("no coverage targets")
        if not self.traversable and self.boundary is None:
            raise ScenarioError("non-traversable scenario needs a boundary")
        if not self.control_grid:
            raise ScenarioError("control_grid must be nonempty")
        if any(abs(g) > self.kinematics.force_max + 1e-9 for g in self.control_grid):
            raise ScenarioError("control_grid values exceed force_max")
        xmin, ymin, xmax, ymax = self.kinematics.workspace
        if not (xmin <= self.x0.pos.x <= xmax and ymin <= self.x0.pos.y <= ymax):
            raise ScenarioError("x0 lies outside the workspace")
        if abs(self.x0.vel[0]) > self.kinematics.speed_max or \
                abs(self.x0.vel[1]) > self.kinematics.speed_max:
            raise ScenarioError("x0 velocity exceeds speed_max")
        for poly in self.active_obstacles():
            if inside_polygon_strict(poly, self.x0.pos):
                raise ScenarioError("x0 lies inside an obstacle")

    def active_obstacles(self) -> list[ConvexPolygon]:
        """Polygons the agent must stay out of (region hull unless traversable,
        plus any extra obstacles)."""
        obs: list[ConvexPolygon] = []
        if not self.traversable and self.boundary is not None:
            obs.append(self.boundary.hull)
        obs.extend(self.extra_obstacles)
        return obs


_KIN_KEYS = {"dt", "mass", "drag", "force_max", "speed_max", "workspace"}
_TOP_KEYS = {"kinematics", "x0", "fov", "angles_deg", "zooms", "ray_count",
             "region", "traversable", "grid", "horizon", "weights", "big_m",
             "visibility", "solver"}


def _require_keys(d: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = allowed - set(d)
    if missing:
        raise ScenarioError(f"missing keys in {where}: {sorted(missing)}")


def region_points(region: Mapping[str, Any]) -> list[Point2]:
    if "type" not in region:
        raise ScenarioError("region needs a 'type' key")
    rtype = region["type"]
    if rtype == "bell":
        _require_keys(region, {"type", "a", "b", "c", "n", "x_range"}, "region")
        lo, hi = region["x_range"]
        return bell_curve_points(float(region["a"]), float(region["b"]),
                                 float(region["c"]), int(region["n"]),
                                 (float(lo), float(hi)))
    if rtype == "points":
        _require_keys(region, {"type", "points"}, "region")
        return [Point2(float(x), float(y)) for x, y in region["points"]]
    raise ScenarioError(f"unknown region type {rtype!r}")


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    _require_keys(doc, _TOP_KEYS, "scenario")
    kin = doc["kinematics"]
    _require_keys(kin, _KIN_KEYS, "kinematics")
    if len(kin["workspace"]) != 4:
        raise ScenarioError("workspace must be [xmin, ymin, xmax, ymax]")
    params = KinematicParams(dt=float(kin["dt"]), mass=float(kin["mass"]),
                             drag=float(kin["drag"]),
                             force_max=float(kin["force_max"]),
                             speed_max=float(kin["speed_max"]),
                             workspace=tuple(float(v) for v in kin["workspace"]))
    _require_keys(doc["x0"], {"pos", "vel"}, "x0")
    x0 = AgentState(Point2(*(float(v) for v in doc["x0"]["pos"])),
                    tuple(float(v) for v in doc["x0"]["vel"]))
    _require_keys(doc["fov"], {"apex_angle_deg", "range_m"}, "fov")
    fov = FovParams(math.radians(float(doc["fov"]["apex_angle_deg"])),
                    float(doc["fov"]["range_m"]))
    angles = tuple(math.radians(float(a)) for a in doc["angles_deg"])
    zooms = tuple(float(z) for z in doc["zooms"])
    points = tuple(region_points(doc["region"]))
    traversable = bool(doc["traversable"])
    boundary = None if traversable else build_boundary(points)
    _require_keys(doc["grid"], {"nx", "ny"}, "grid")
    grid = build_grid(params.workspace, int(doc["grid"]["nx"]), int(doc["grid"]["ny"]))
    _require_keys(doc["weights"], {"w1", "w2", "w3"}, "weights")
    weights = tuple(float(doc["weights"][k]) for k in ("w1", "w2", "w3"))
    _require_keys(doc["visibility"], {"n_s", "seed"}, "visibility")
    _require_keys(doc["solver"], {"control_grid", "time_limit_s", "max_nodes"}, "solver")
    sol = doc["solver"]
    return Scenario(
        kinematics=params, x0=x0, fov=fov, angles=angles, zooms=zooms,
        ray_count=int(doc["ray_count"]), points=points, boundary=boundary,
        traversable=traversable, grid=grid, horizon=int(doc["horizon"]),
        weights=weights, big_m=float(doc["big_m"]),
        n_s=int(doc["visibility"]["n_s"]), seed=int(doc["visibility"]["seed"]),
        control_grid=tuple(float(g) for g in sol["control_grid"]),
        time_limit_s=None if sol["time_limit_s"] is None else float(sol["time_limit_s"]),
        max_nodes=None if sol["max_nodes"] is None else int(sol["max_nodes"]),
    )


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def scenario_hash(doc: Mapping[str, Any]) -> str:
    """Stable identity of a scenario document (canonical JSON, sha256/16)."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    """Apply `path=value` overrides (dotted paths) to a scenario document.

    The path must already exist in the document; values parse as JSON with a
    fallback to the raw string."""
    out = json.loads(json.dumps(doc))
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        keys = path.split(".")
        node = out
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ScenarioError(f"unknown override key {path!r}")
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ScenarioError(f"unknown override key {path!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node[keys[-1]] = value
    return out
