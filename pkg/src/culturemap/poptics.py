"""Personalised OPTICS: per-user density clustering of check-in locations.

The neighbour rank behind each core distance is a fixed fraction of the user's
own location count, the reachability threshold is chosen automatically by the
``std(RD*) * N / len(RD*)`` score, and the densest cluster yields the user's
activity centre and radii.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PopticsConfig:
    eta: float = 0.1
    max_dist: float = math.inf   # initial reachability of unvisited points
    threshold_candidates: str = "unique-reach"
    min_radius: float = 100.0    # floor for both activity radii, metres

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.threshold_candidates != "unique-reach":
            raise ValueError(f"unknown threshold candidate rule {self.threshold_candidates!r}")
        if self.min_radius <= 0:
            raise ValueError("min_radius must be positive")


@dataclass
class ReachabilityResult:
    order: np.ndarray          # location indices in visiting order
    reach: np.ndarray          # reachability per ordered position; reach[0] == 0
    core: np.ndarray           # core distance per location (input order)
    rd_th: float = math.nan
    score: float = math.nan
    clusters: list[np.ndarray] = field(default_factory=list)
    fallback: bool = False


@dataclass
class UserActivityProfile:
    user: int
    centre: tuple[float, float]   # projected metres (x, y)
    radius_overall: float
    radius_pattern: float
    pattern: int
    flagged: bool = False         # no cluster found; centre is the global centroid


def neighbour_rank(n: int, eta: float) -> int:
    """Rank of the neighbour defining the core distance: ceil(n * eta), clamped to [1, n-1]."""
    # the small offset keeps products such as 30 * 0.1 = 3.0000000000000004 at 3
    return min(max(1, math.ceil(n * eta - 1e-9)), max(n - 1, 1))


def pairwise(xy: np.ndarray) -> np.ndarray:
    dx = xy[:, None, 0] - xy[None, :, 0]
    dy = xy[:, None, 1] - xy[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def core_distances(xy, eta: float) -> np.ndarray:
    """Distance from every location to its ``neighbour_rank``-th nearest other
    location; repeated locations count as separate neighbours at distance 0."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    n = xy.shape[0]
    if n == 0:
        raise ValueError("need at least one location")
    if n == 1:
        return np.zeros(1)
    k = neighbour_rank(n, eta)
    d = pairwise(xy)
    np.fill_diagonal(d, np.inf)
    return np.partition(d, k - 1, axis=1)[:, k - 1]


def optics_order(xy, core, max_dist: float = math.inf) -> ReachabilityResult:
    """Global-seed OPTICS walk from location 0: always emit the unvisited location
    with the smallest tentative reachability (lowest index on ties)."""
    xy = np.ascontiguousarray(np.asarray(xy, dtype=float).reshape(-1, 2))
    core = np.ascontiguousarray(core, dtype=float)
    order, reach = kernels.optics_order(xy, core, float(max_dist))
    return ReachabilityResult(np.asarray(order), np.asarray(reach), core)


def threshold_scores(reach: np.ndarray, n: int | None = None) -> list[tuple[float, float]]:
    """(candidate, score) for every candidate with at least two reach values below it.

    Candidates are the unique finite reach values plus +inf, each used as an
    exclusive upper bound; the score is constant between consecutive candidates.
    """
    reach = np.asarray(reach, dtype=float)
    n = reach.size if n is None else n
    finite = np.unique(reach[np.isfinite(reach)])
    out = []
    for c in list(finite) + [math.inf]:
        kept = reach[reach < c]
        if kept.size < 2:
            continue
        out.append((float(c), float(np.std(kept)) * n / kept.size))
    return out


def select_threshold(result: ReachabilityResult) -> ReachabilityResult:
    scored = threshold_scores(result.reach)
    if not scored:
        result.rd_th, result.score, result.fallback = math.inf, math.nan, True
        return result
    best = min(range(len(scored)), key=lambda i: (scored[i][1], i))
    result.rd_th, result.score = scored[best]
    result.fallback = False
    return result


def extract_clusters(order, reach, rd_th: float) -> list[np.ndarray]:
    """Walk the ordering: reach below the threshold extends the current group,
    anything else closes it.  The closing location itself joins no group."""
    groups, current = [], []
    for idx, rd in zip(np.asarray(order).tolist(), np.asarray(reach).tolist()):
        if rd < rd_th:
            current.append(idx)
        else:
            if current:
                groups.append(np.array(current, dtype=np.int64))
            current = []
    if current:
        groups.append(np.array(current, dtype=np.int64))
    return groups


def poptics(xy, config: PopticsConfig = PopticsConfig()) -> ReachabilityResult:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    result = optics_order(xy, core_distances(xy, config.eta), config.max_dist)
    select_threshold(result)
    result.clusters = extract_clusters(result.order, result.reach, result.rd_th)
    return result


def _dominant(result: ReachabilityResult) -> np.ndarray | None:
    if not result.clusters:
        return None
    pos = np.empty(result.order.size, dtype=np.int64)
    pos[result.order] = np.arange(result.order.size)

    def key(i):
        members = result.clusters[i]
        return (-members.size, float(np.mean(result.reach[pos[members]])), i)

    return result.clusters[min(range(len(result.clusters)), key=key)]


def activity_profile(user: int, all_xy, pattern_xy, pattern: int,
                     config: PopticsConfig = PopticsConfig(),
                     result: ReachabilityResult | None = None) -> UserActivityProfile:
    """Centre and radii of a user's dominant cluster.

    The centre is the centroid of the largest cluster (ties: lower mean reach);
    the overall radius is the cluster's extent about it; the pattern radius is the
    extent of the pattern check-ins lying inside the overall radius.  Both radii
    are floored at ``config.min_radius``.
    """
    all_xy = np.asarray(all_xy, dtype=float).reshape(-1, 2)
    pattern_xy = np.asarray(pattern_xy, dtype=float).reshape(-1, 2)
    if result is None:
        result = poptics(all_xy, config)
    members = _dominant(result)
    flagged = members is None
    pts = all_xy if flagged else all_xy[members]
    mu = pts.mean(axis=0)
    r = max(float(np.max(np.hypot(*(pts - mu).T))), config.min_radius)
    r_pattern = config.min_radius
    if pattern_xy.size:
        d = np.hypot(*(pattern_xy - mu).T)
        inside = d[d <= r]
        if inside.size:
            r_pattern = max(float(inside.max()), config.min_radius)
    return UserActivityProfile(user, (float(mu[0]), float(mu[1])), r, r_pattern, int(pattern), flagged)


def profiles_to_csv(profiles, users: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "pattern", "mu_x", "mu_y", "r", "r_uz", "flagged"])
        for p in profiles:
            w.writerow([users[p.user], p.pattern, repr(p.centre[0]), repr(p.centre[1]),
                        repr(p.radius_overall), repr(p.radius_pattern), int(p.flagged)])


def profiles_from_csv(path, users: list[str]) -> list[UserActivityProfile]:
    index = {u: i for i, u in enumerate(users)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(UserActivityProfile(index[row["user"]], (float(row["mu_x"]), float(row["mu_y"])),
                                           float(row["r"]), float(row["r_uz"]), int(row["pattern"]),
                                           bool(int(row["flagged"]))))
    return out


def reachability_to_csv(result: ReachabilityResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "index", "reach"])
        for i, (idx, rd) in enumerate(zip(result.order.tolist(), result.reach.tolist())):
            w.writerow([i, idx, repr(rd)])
