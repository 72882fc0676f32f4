"""Check DSR maps against behaviour: do users in high-DSR cells travel further
to reach venues of their own pattern?"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dsi import DsrGrid
from .poptics import UserActivityProfile


@dataclass
class TravelRecord:
    user: int
    pattern: int
    mean_travel: float


@dataclass
class Correlation:
    pattern: int
    r: float        # NaN when undefined
    n: int
    reason: str = ""


def travel_distances(event_user, event_venue, venue_xy, venue_pattern,
                     profiles: list[UserActivityProfile]) -> tuple[list[TravelRecord], int]:
    """Mean distance from each user's centre to the venues of their own pattern
    they checked in at, one term per check-in.  Returns the records and the number
    of users omitted for having no such check-in."""
    event_user = np.asarray(event_user)
    event_venue = np.asarray(event_venue)
    venue_xy = np.asarray(venue_xy, dtype=float)
    venue_pattern = np.asarray(venue_pattern)
    by_user = {p.user: p for p in profiles}
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for u, v in zip(event_user.tolist(), event_venue.tolist()):
        p = by_user.get(u)
        if p is None or venue_pattern[v] != p.pattern:
            continue
        d = math.hypot(venue_xy[v, 0] - p.centre[0], venue_xy[v, 1] - p.centre[1])
        sums[u] = sums.get(u, 0.0) + d
        counts[u] = counts.get(u, 0) + 1
    records = [TravelRecord(u, by_user[u].pattern, sums[u] / counts[u]) for u in sorted(sums)]
    return records, len(profiles) - len(records)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return math.nan
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))


def correlation_pairs(records: list[TravelRecord], profiles: list[UserActivityProfile], grid: DsrGrid,
                      pattern: int, per_user: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(DSR, travel) pairs for one pattern: per cell (users located by centre,
    travel averaged within the cell) or, with ``per_user``, one pair per user."""
    centre = {p.user: p.centre for p in profiles}
    recs = [r for r in records if r.pattern == pattern]
    if not recs or pattern not in grid.dsr:
        return np.zeros(0), np.zeros(0)
    cells = grid.spec.cell_of(np.array([centre[r.user] for r in recs]))
    travel = np.array([r.mean_travel for r in recs])
    dsr = grid.dsr[pattern]
    ok = cells >= 0
    ok[ok] = np.isfinite(dsr[cells[ok]])
    cells, travel = cells[ok], travel[ok]
    if per_user:
        return dsr[cells], travel
    uniq, inv = np.unique(cells, return_inverse=True)
    mean_travel = np.bincount(inv, weights=travel) / np.bincount(inv)
    return dsr[uniq], mean_travel


def dsr_travel_correlation(records, profiles, grid: DsrGrid, pattern: int, per_user: bool = False) -> Correlation:
    x, y = correlation_pairs(records, profiles, grid, pattern, per_user)
    if x.size < 3:
        return Correlation(pattern, math.nan, int(x.size), "fewer than 3 pairs")
    r = pearson(x, y)
    if math.isnan(r):
        return Correlation(pattern, r, int(x.size), "zero variance")
    return Correlation(pattern, r, int(x.size))


def correlations_to_csv(rows: list[Correlation], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "pearson_r", "n", "note"])
        for c in rows:
            w.writerow([c.pattern, "" if math.isnan(c.r) else repr(c.r), c.n, c.reason])
