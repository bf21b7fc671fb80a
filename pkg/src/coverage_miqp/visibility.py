"""Ray-casting visibility: per-pose tests and the offline-learned cell table.

A target point is visible from a pose when it lies inside the placed sensor
footprint and some camera ray's nearest boundary hit is a segment incident to
the point. The cell-level table ORs this over n_s uniformly sampled positions
per grid cell and over every sensor configuration; sampling is keyed by
(seed, cell, sample) so builds are reproducible and independent of ordering.
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .environment import GridCell, Scenario
from .geometry import Point2, nearest_hit
from .sensing import FovConfig, config_halfplanes, config_set_hash, fov_contains, rays


@dataclass(frozen=True)
class TableMeta:
    n_s: int
    seed: int
    ray_count: int
    config_set_hash: str
    n_cells: int
    n_points: int


@dataclass(frozen=True)
class VisibilityTable:
    """Boolean matrix indexed (cell, point); True means some sampled pose in
    the cell sees the point under some configuration."""

    table: np.ndarray
    meta: TableMeta

    def __post_init__(self) -> None:
        if self.table.shape != (self.meta.n_cells, self.meta.n_points):
            raise ValueError("table shape disagrees with meta")


def expected_meta(s: Scenario, configs: Sequence[FovConfig]) -> TableMeta:
    return TableMeta(n_s=s.n_s, seed=s.seed, ray_count=s.ray_count,
                     config_set_hash=config_set_hash(configs, s.ray_count),
                     n_cells=len(s.grid), n_points=len(s.points))


def visible_points(pos: Point2, cfg: FovConfig, env: Scenario) -> set[int]:
    """Indices of target points visible from pos under one configuration.

    With no boundary (traversable region) nothing occludes and footprint
    containment alone decides.
    """
    hps = config_halfplanes(cfg)
    in_fov = {i for i, p in enumerate(env.points) if fov_contains(hps, pos, p)}
    if env.boundary is None or not in_fov:
        return in_fov
    hits: set[int] = set()
    for ray in rays(cfg, pos, env.ray_count).rays:
        idx = nearest_hit(ray, env.boundary.segments)
        if idx is not None:
            hits.add(idx)
    incident = env.boundary.point_to_segment
    return {i for i in in_fov if hits.intersection(incident[i])}


def sample_position(seed: int, cell: GridCell, cell_index: int,
                    sample_index: int) -> Point2:
    """Deterministic uniform sample keyed by (seed, cell, sample).

    Counter-based generation makes every sample independent of how many
    samples are drawn and of any parallel evaluation order.
    """
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(cell_index)])
    bits = np.random.Philox(counter=[np.uint64(sample_index), 0, 0, 0], key=key)
    u, v = np.random.Generator(bits).random(2)
    xmin, ymin, xmax, ymax = cell.bounds
    return Point2(xmin + u * (xmax - xmin), ymin + v * (ymax - ymin))


def _cell_row(env: Scenario, configs: Sequence[FovConfig], ci: int) -> np.ndarray:
    row = np.zeros(len(env.points), dtype=bool)
    cell = env.grid.cells[ci]
    for i in range(env.n_s):
        pos = sample_position(env.seed, cell, ci, i)
        for cfg in configs:
            for p in visible_points(pos, cfg, env):
                row[p] = True
    return row


def learn_table(env: Scenario, configs: Sequence[FovConfig],
                threads: int = 1) -> VisibilityTable:
    """Build the cell/point visibility table; cells are independent, so they
    may be evaluated in parallel without changing the result."""
    n_cells = len(env.grid)
    table = np.zeros((n_cells, len(env.points)), dtype=bool)
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            for ci, row in enumerate(ex.map(
                    lambda i: _cell_row(env, configs, i), range(n_cells))):
                table[ci] = row
    else:
        for ci in range(n_cells):
            table[ci] = _cell_row(env, configs, ci)
    return VisibilityTable(table, expected_meta(env, configs))


def query(t: VisibilityTable, c: int, p: int) -> bool:
    if not 0 <= c < t.meta.n_cells:
        raise IndexError(f"cell index {c} out of range")
    if not 0 <= p < t.meta.n_points:
        raise IndexError(f"point index {p} out of range")
    return bool(t.table[c, p])


def save_table(t: VisibilityTable, path: str | Path) -> None:
    doc = {
        "meta": {
            "n_s": t.meta.n_s, "seed": t.meta.seed, "ray_count": t.meta.ray_count,
            "config_set_hash": t.meta.config_set_hash,
            "n_cells": t.meta.n_cells, "n_points": t.meta.n_points,
        },
        "rows": ["".join("1" if b else "0" for b in row) for row in t.table],
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_table(path: str | Path,
               expected: Optional[TableMeta] = None) -> VisibilityTable:
    """Read a cached table; a meta mismatch against `expected` is an error,
    never a silent reuse."""
    doc = json.loads(Path(path).read_text())
    m = doc["meta"]
    meta = TableMeta(n_s=int(m["n_s"]), seed=int(m["seed"]),
                     ray_count=int(m["ray_count"]),
                     config_set_hash=str(m["config_set_hash"]),
                     n_cells=int(m["n_cells"]), n_points=int(m["n_points"]))
    if expected is not None and meta != expected:
        raise ValueError(f"cached table meta {meta} does not match scenario {expected}")
    rows = doc["rows"]
    if len(rows) != meta.n_cells or any(len(r) != meta.n_points for r in rows):
        raise ValueError("table rows disagree with meta dimensions")
    table = np.array([[ch == "1" for ch in row] for row in rows], dtype=bool)
    return VisibilityTable(table, meta)
