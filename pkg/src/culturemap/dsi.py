"""Demand, supply and demand-supply ratio (DSR) layers on a square city grid.

Each user contributes a 1-D normal density of their distance to the cell centroid,
with the pattern radius as scale, truncated at that radius; each venue contributes
an untruncated density with its service range as scale.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .datamodel import unproject_arrays
from .poptics import UserActivityProfile

log = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]   # projected south-west corner (x, y)
    cell_size: float = 400.0
    n_cols: int = 1
    n_rows: int = 1

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.n_cols < 1 or self.n_rows < 1:
            raise ValueError("grid needs at least one cell")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def centroids(self) -> np.ndarray:
        """(n_rows * n_cols, 2) centroids in row-major order (row 0 = south)."""
        cols = self.origin[0] + (np.arange(self.n_cols) + 0.5) * self.cell_size
        rows = self.origin[1] + (np.arange(self.n_rows) + 0.5) * self.cell_size
        xx, yy = np.meshgrid(cols, rows)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cell_of(self, xy) -> np.ndarray:
        """Row-major cell index of each point, -1 outside the grid."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        col = np.floor((xy[:, 0] - self.origin[0]) / self.cell_size).astype(np.int64)
        row = np.floor((xy[:, 1] - self.origin[1]) / self.cell_size).astype(np.int64)
        ok = (col >= 0) & (col < self.n_cols) & (row >= 0) & (row < self.n_rows)
        return np.where(ok, row * self.n_cols + col, -1)

    @classmethod
    def covering(cls, points, cell_size: float = 400.0, reference: tuple[float, float] | None = None) -> "GridSpec":
        """Smallest grid whose cells are aligned with ``reference`` (the projection
        origin, so rows follow parallels and columns follow meridians) and which
        covers every point."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if pts.size == 0:
            raise ValueError("no points to cover")
        lo = np.floor(pts.min(axis=0) / cell_size) * cell_size
        hi = np.floor(pts.max(axis=0) / cell_size) * cell_size + cell_size
        n = np.maximum(np.rint((hi - lo) / cell_size).astype(int), 1)
        return cls((float(lo[0]), float(lo[1])), cell_size, int(n[0]), int(n[1]))


@dataclass
class VenueSupplyProfile:
    venue: int
    location: tuple[float, float]
    pattern: int
    sigma: float
    flagged: bool = False   # no visitors; sigma is the floor


@dataclass
class DsrGrid:
    spec: GridSpec
    demand: dict[int, np.ndarray] = field(default_factory=dict)   # pattern -> (n_cells,)
    supply: dict[int, np.ndarray] = field(default_factory=dict)
    dsr: dict[int, np.ndarray] = field(default_factory=dict)      # NaN where undefined


def normal_kernel(dist: np.ndarray, scale) -> np.ndarray:
    scale = np.asarray(scale, dtype=float)
    return np.exp(-(dist * dist) / (2.0 * scale * scale)) / (SQRT_2PI * scale)


def _distances(cells: np.ndarray, centres: np.ndarray) -> np.ndarray:
    dx = cells[:, None, 0] - centres[None, :, 0]
    dy = cells[:, None, 1] - centres[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def demand_layer(profiles: list[UserActivityProfile], spec: GridSpec, chunk: int = 2048) -> np.ndarray:
    """Summed truncated demand of ``profiles`` at every cell centroid."""
    cells = spec.centroids()
    out = np.zeros(spec.n_cells)
    if not profiles:
        return out
    mu = np.array([p.centre for p in profiles], dtype=float)
    r = np.array([p.radius_pattern for p in profiles], dtype=float)
    for a in range(0, cells.shape[0], chunk):
        d = _distances(cells[a:a + chunk], mu)
        contrib = np.where(d <= r, normal_kernel(d, r), 0.0)
        out[a:a + chunk] = contrib.sum(axis=1)
    return out


def venue_sigma(location, visitor_centres, floor: float = 100.0) -> tuple[float, bool]:
    """Mean distance from the venue to its visitors' centres, floored.
    Returns (sigma, flagged); flagged means no visitors."""
    vc = np.asarray(visitor_centres, dtype=float).reshape(-1, 2)
    if vc.shape[0] == 0:
        return floor, True
    d = np.hypot(vc[:, 0] - location[0], vc[:, 1] - location[1])
    return max(float(d.mean()), floor), False


def supply_layer(venues: list[VenueSupplyProfile], spec: GridSpec, chunk: int = 2048) -> np.ndarray:
    cells = spec.centroids()
    out = np.zeros(spec.n_cells)
    if not venues:
        return out
    loc = np.array([v.location for v in venues], dtype=float)
    sigma = np.array([v.sigma for v in venues], dtype=float)
    for a in range(0, cells.shape[0], chunk):
        out[a:a + chunk] = normal_kernel(_distances(cells[a:a + chunk], loc), sigma).sum(axis=1)
    return out


def dsr_layer(demand: np.ndarray, supply: np.ndarray, supply_eps: float = 1e-12) -> np.ndarray:
    """Cell-wise demand / supply; NaN where supply does not exceed ``supply_eps``."""
    demand = np.asarray(demand, dtype=float)
    supply = np.asarray(supply, dtype=float)
    if demand.shape != supply.shape:
        raise ValueError("demand and supply layers are not aligned")
    ok = supply > supply_eps
    out = np.full(demand.shape, np.nan)
    out[ok] = demand[ok] / supply[ok]
    if not ok.any():
        warnings.warn("DSR undefined in every cell (no supply)", RuntimeWarning, stacklevel=2)
    return out


def venue_profiles(venue_xy, venue_pattern, venue_visitors: list[np.ndarray],
                   user_centres: np.ndarray, floor: float = 100.0) -> list[VenueSupplyProfile]:
    out = []
    for j, (loc, z, visitors) in enumerate(zip(np.asarray(venue_xy, float), venue_pattern, venue_visitors)):
        sigma, flagged = venue_sigma(loc, user_centres[np.asarray(visitors, dtype=np.int64)], floor)
        out.append(VenueSupplyProfile(j, (float(loc[0]), float(loc[1])), int(z), sigma, flagged))
    return out


def build_grid(profiles: list[UserActivityProfile], venues: list[VenueSupplyProfile], spec: GridSpec,
               patterns, supply_eps: float = 1e-12) -> DsrGrid:
    grid = DsrGrid(spec)
    for z in patterns:
        d = demand_layer([p for p in profiles if p.pattern == z], spec)
        s = supply_layer([v for v in venues if v.pattern == z], spec)
        grid.demand[z], grid.supply[z] = d, s
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            grid.dsr[z] = dsr_layer(d, s, supply_eps)
        if np.isnan(grid.dsr[z]).all():
            log.warning("pattern %d: DSR undefined everywhere", z)
    return grid


def _minmax(values: np.ndarray) -> np.ndarray:
    ok = np.isfinite(values)
    out = np.full(values.shape, np.nan)
    if ok.any():
        lo, hi = values[ok].min(), values[ok].max()
        out[ok] = (values[ok] - lo) / (hi - lo) if hi > lo else 0.0
    return out


def layers_to_csv(grid: DsrGrid, path) -> None:
    """One row per (pattern, cell) with defined DSR: raw values plus a min-max
    normalised DSR column."""
    spec = grid.spec
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "row", "col", "demand", "supply", "dsr", "dsr_norm"])
        for z in sorted(grid.dsr):
            norm = _minmax(grid.dsr[z])
            for cell in np.flatnonzero(np.isfinite(grid.dsr[z])).tolist():
                row, col = divmod(cell, spec.n_cols)
                w.writerow([z, row, col, repr(float(grid.demand[z][cell])), repr(float(grid.supply[z][cell])),
                            repr(float(grid.dsr[z][cell])), repr(float(norm[cell]))])


def priority_to_csv(grid: DsrGrid, path) -> None:
    """Cells ranked by DSR, descending, per pattern (ties: lower cell index first)."""
    spec = grid.spec
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "rank", "row", "col", "dsr"])
        for z in sorted(grid.dsr):
            vals = grid.dsr[z]
            cells = np.flatnonzero(np.isfinite(vals))
            ranked = cells[np.argsort(-vals[cells], kind="stable")]
            for rank, cell in enumerate(ranked.tolist(), start=1):
                row, col = divmod(cell, spec.n_cols)
                w.writerow([z, rank, row, col, repr(float(vals[cell]))])


def to_geojson(grid: DsrGrid, reference: tuple[float, float], path) -> None:
    """FeatureCollection of cell polygons (lon, lat) with per-pattern properties."""
    spec = grid.spec
    s = spec.cell_size
    features = []
    for z in sorted(grid.dsr):
        for cell in np.flatnonzero(np.isfinite(grid.dsr[z])).tolist():
            row, col = divmod(cell, spec.n_cols)
            x0, y0 = spec.origin[0] + col * s, spec.origin[1] + row * s
            corners = np.array([[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s], [x0, y0]])
            ll = unproject_arrays(corners, reference)
            features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon",
                             "coordinates": [[[round(float(lon), 7), round(float(lat), 7)] for lat, lon in ll]]},
                "properties": {"pattern": z, "row": row, "col": col,
                               "demand": float(grid.demand[z][cell]), "supply": float(grid.supply[z][cell]),
                               "dsr": float(grid.dsr[z][cell])},
            })
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, separators=(",", ":"))
        fh.write("\n")
