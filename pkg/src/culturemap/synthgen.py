"""Synthetic check-in corpora with planted patterns, geometry and ground truth."""

from __future__ import annotations

import calendar
import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .datamodel import FIVE_SLOTS, CheckIn, unproject_arrays

# (year, month) of the observation window; mirrors a four-season sample
DEFAULT_MONTHS = ((2016, 10), (2017, 1), (2017, 4), (2017, 7))
SLOT_HOURS = {s: range(a, b) for s, (a, b) in enumerate(zip(FIVE_SLOTS.starts, FIVE_SLOTS.starts[1:] + (24,)))}
# preferred five-slot period per planted pattern, cycled: evening, morning, afternoon, night, noon
PREFERRED_SLOTS = (4, 1, 3, 0, 2)


@dataclass
class SynthSpec:
    k_true: int = 4
    n_users: int = 500
    checkins_per_user: tuple[int, int] = (40, 40)
    n_categories: int = 40
    venues_per_category: int = 3
    venue_peak: float = 0.9        # mass of a pattern on its own categories
    shared_categories: int = 0     # leading categories that every pattern uses equally
    shared_mass: float = 0.0       # mass each pattern puts on the shared categories
    time_peak: float = 0.85        # mass of a pattern on its preferred period of day
    weekend_peak: float = 0.7      # mass on the preferred part of the week
    month_peak: float = 0.55       # mass on the preferred month
    user_mixing: float = 0.05      # mass of a user's mixture off the planted pattern
    extent_m: float = 20000.0
    venue_spread_m: float | None = None    # Gaussian spread of venues about the centre; None = uniform
    user_spread_m: float | None = None     # same, for user homes
    venue_decay_m: float | None = None     # distance decay of venue choice; None = uniform choice
    home_checkins: int = 30
    work_checkins: int = 10
    blob_sd_m: float = 60.0
    months: tuple[tuple[int, int], ...] = DEFAULT_MONTHS
    tz_offset: int = 8 * 3600
    reference: tuple[float, float] = (39.9042, 116.4074)
    seed: int = 0

    def __post_init__(self):
        if self.k_true < 1 or self.n_users < 1:
            raise ValueError("k_true and n_users must be positive")
        if self.n_categories - self.shared_categories < self.k_true:
            raise ValueError("need at least one own category per planted pattern")
        if self.venues_per_category < 1:
            raise ValueError("every category needs at least one venue")
        lo, hi = self.checkins_per_user
        if not 1 <= lo <= hi:
            raise ValueError("checkins_per_user must satisfy 1 <= min <= max")
        if self.extent_m <= 0:
            raise ValueError("extent must be positive")
        for name in ("venue_peak", "time_peak", "weekend_peak", "month_peak", "user_mixing", "shared_mass"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.shared_mass > 0 and self.shared_categories == 0:
            raise ValueError("shared_mass needs shared_categories")


@dataclass
class Synthetic:
    spec: SynthSpec
    checkins: list[CheckIn]
    cultural_categories: list[str]
    user_ids: list[str]
    user_pattern: np.ndarray        # planted pattern per user
    user_home: np.ndarray           # (n_users, 2) projected metres
    user_work: np.ndarray
    category_ids: list[str]
    category_pattern: np.ndarray    # -1 for shared categories
    venue_ids: list[str]
    venue_category: np.ndarray
    venue_xy: np.ndarray
    pattern_category: np.ndarray    # (k_true, n_categories) planted distributions
    pattern_slot: np.ndarray        # (k_true, 5) distribution over periods of day
    pattern_weekend: np.ndarray     # (k_true,) probability of a weekend check-in
    pattern_month: np.ndarray       # (k_true, n_months)
    event_pattern: list[int] = field(default_factory=list)  # planted pattern of each cultural check-in


def _place(rng, n, extent, spread):
    half = extent / 2.0
    if spread is None:
        return rng.uniform(-half, half, size=(n, 2))
    return np.clip(rng.normal(0.0, spread, size=(n, 2)), -half, half)


def planted_distributions(spec: SynthSpec):
    K, V = spec.k_true, spec.n_categories
    own = np.full(V, -1)
    own[spec.shared_categories:] = np.arange(V - spec.shared_categories) % K
    cat = np.zeros((K, V))
    for k in range(K):
        mine = own == k
        other = (own != k) & (own >= 0)
        cat[k, mine] = spec.venue_peak * (1.0 - spec.shared_mass) / mine.sum()
        if other.any():
            cat[k, other] = (1.0 - spec.venue_peak) * (1.0 - spec.shared_mass) / other.sum()
        else:
            cat[k, mine] += (1.0 - spec.venue_peak) * (1.0 - spec.shared_mass) / mine.sum()
        if spec.shared_categories:
            cat[k, :spec.shared_categories] = spec.shared_mass / spec.shared_categories
    slot = np.full((K, 5), (1.0 - spec.time_peak) / 4)
    for k in range(K):
        slot[k, PREFERRED_SLOTS[k % 5]] = spec.time_peak
    weekend = np.array([spec.weekend_peak if k % 2 == 0 else 1.0 - spec.weekend_peak for k in range(K)])
    M = len(spec.months)
    month = np.full((K, M), (1.0 - spec.month_peak) / max(M - 1, 1))
    for k in range(K):
        month[k, k % M] = spec.month_peak if M > 1 else 1.0
    return own, cat, slot, weekend, month


def _days_by_type(year, month):
    n = calendar.monthrange(year, month)[1]
    weekend = [d for d in range(1, n + 1) if calendar.weekday(year, month, d) >= 5]
    weekday = [d for d in range(1, n + 1) if calendar.weekday(year, month, d) < 5]
    return weekday, weekend


def generate(spec: SynthSpec) -> Synthetic:
    """Draw a corpus.  Deterministic for a given spec (including its seed)."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    K, V, U = spec.k_true, spec.n_categories, spec.n_users
    own, cat_dist, slot_dist, weekend_p, month_dist = planted_distributions(spec)

    cat_ids = [f"cat{c:02d}" for c in range(V)]
    venue_category = np.repeat(np.arange(V), spec.venues_per_category)
    n_venues = venue_category.size
    venue_ids = [f"v{j:04d}" for j in range(n_venues)]
    venue_xy = _place(rng, n_venues, spec.extent_m, spec.venue_spread_m)

    user_ids = [f"u{u:05d}" for u in range(U)]
    user_pattern = np.arange(U) % K
    rng.shuffle(user_pattern)
    home = _place(rng, U, spec.extent_m, spec.user_spread_m)
    work = _place(rng, U, spec.extent_m, spec.user_spread_m)
    mixture = np.full((U, K), spec.user_mixing / max(K - 1, 1))
    mixture[np.arange(U), user_pattern] = 1.0 - spec.user_mixing if K > 1 else 1.0

    by_cat = [np.flatnonzero(venue_category == c) for c in range(V)]
    day_table = [_days_by_type(y, m) for (y, m) in spec.months]
    local_tz = timezone(timedelta(seconds=spec.tz_offset))

    def stamp(year, month, day, hour, minute, second):
        return int(datetime(year, month, day, hour, minute, second, tzinfo=local_tz).timestamp())

    def random_time():
        mi = int(rng.integers(len(spec.months)))
        y, m = spec.months[mi]
        d = int(rng.integers(1, calendar.monthrange(y, m)[1] + 1))
        return y, m, d

    records: list[CheckIn] = []
    event_pattern: list[int] = []
    lo, hi = spec.checkins_per_user
    for u in range(U):
        n = int(rng.integers(lo, hi + 1))
        zs = rng.choice(K, size=n, p=mixture[u])
        for z in zs:
            c = int(rng.choice(V, p=cat_dist[z]))
            cands = by_cat[c]
            if spec.venue_decay_m is None:
                j = int(cands[rng.integers(cands.size)])
            else:
                d = np.hypot(*(venue_xy[cands] - home[u]).T)
                w = np.exp(-(d - d.min()) / spec.venue_decay_m)
                j = int(cands[rng.choice(cands.size, p=w / w.sum())])
            s = int(rng.choice(5, p=slot_dist[z]))
            hour = int(rng.choice(list(SLOT_HOURS[s])))
            mi = int(rng.choice(len(spec.months), p=month_dist[z]))
            y, m = spec.months[mi]
            weekday, weekend = day_table[mi]
            days = weekend if rng.random() < weekend_p[z] else weekday
            day = days[int(rng.integers(len(days)))]
            ts = stamp(y, m, day, hour, int(rng.integers(60)), int(rng.integers(60)))
            records.append((user_ids[u], venue_ids[j], cat_ids[c], venue_xy[j], ts))
            event_pattern.append(int(z))
        for centre, count, label in ((home[u], spec.home_checkins, "home"), (work[u], spec.work_checkins, "work")):
            pts = centre + rng.normal(0.0, spec.blob_sd_m, size=(count, 2))
            for p in pts:
                y, m, d = random_time()
                ts = stamp(y, m, d, int(rng.integers(24)), int(rng.integers(60)), int(rng.integers(60)))
                records.append((user_ids[u], f"{label}_{user_ids[u]}", label, p, ts))

    xy = np.array([r[3] for r in records]).reshape(-1, 2)
    latlon = unproject_arrays(xy, spec.reference)
    checkins = [CheckIn(r[0], r[1], r[2], float(round(ll[0], 7)), float(round(ll[1], 7)), r[4])
                for r, ll in zip(records, latlon)]
    return Synthetic(
        spec=spec, checkins=checkins, cultural_categories=list(cat_ids), user_ids=user_ids,
        user_pattern=user_pattern, user_home=home, user_work=work, category_ids=cat_ids,
        category_pattern=own, venue_ids=venue_ids, venue_category=venue_category, venue_xy=venue_xy,
        pattern_category=cat_dist, pattern_slot=slot_dist, pattern_weekend=weekend_p,
        pattern_month=month_dist, event_pattern=event_pattern)


def _rfc3339(ts: int, tz_offset: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone(timedelta(seconds=tz_offset))).isoformat()


def write(syn: Synthetic, directory) -> dict[str, Path]:
    """Write ``checkins.csv`` in the ingest schema plus ground-truth sidecars."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    spec = syn.spec
    paths = {name: d / f"{name}.csv" for name in
             ("checkins", "truth_users", "truth_venues", "truth_categories", "truth_patterns")}

    def writer(path):
        fh = open(path, "w", newline="", encoding="utf-8")
        return fh, csv.writer(fh, lineterminator="\n")

    fh, w = writer(paths["checkins"])
    with fh:
        w.writerow(["user_id", "venue_id", "category", "lat", "lon", "timestamp"])
        for c in syn.checkins:
            w.writerow([c.user_id, c.venue_id, c.category_id, f"{c.lat:.7f}", f"{c.lon:.7f}",
                        _rfc3339(c.timestamp, spec.tz_offset)])

    home_ll = unproject_arrays(syn.user_home, spec.reference)
    fh, w = writer(paths["truth_users"])
    with fh:
        w.writerow(["user_id", "pattern", "home_x", "home_y", "home_lat", "home_lon", "work_x", "work_y"])
        for i, u in enumerate(syn.user_ids):
            w.writerow([u, int(syn.user_pattern[i]), f"{syn.user_home[i, 0]:.3f}", f"{syn.user_home[i, 1]:.3f}",
                        f"{home_ll[i, 0]:.7f}", f"{home_ll[i, 1]:.7f}",
                        f"{syn.user_work[i, 0]:.3f}", f"{syn.user_work[i, 1]:.3f}"])

    fh, w = writer(paths["truth_venues"])
    with fh:
        w.writerow(["venue_id", "category", "pattern", "x", "y"])
        for j, v in enumerate(syn.venue_ids):
            c = int(syn.venue_category[j])
            w.writerow([v, syn.category_ids[c], int(syn.category_pattern[c]),
                        f"{syn.venue_xy[j, 0]:.3f}", f"{syn.venue_xy[j, 1]:.3f}"])

    fh, w = writer(paths["truth_categories"])
    with fh:
        w.writerow(["category", "pattern"] + [f"p_pattern_{k}" for k in range(spec.k_true)])
        for c, cid in enumerate(syn.category_ids):
            w.writerow([cid, int(syn.category_pattern[c])] + [f"{p:.6f}" for p in syn.pattern_category[:, c]])

    fh, w = writer(paths["truth_patterns"])
    with fh:
        w.writerow(["pattern"] + [f"slot_{s}" for s in FIVE_SLOTS.labels] + ["p_weekend"]
                   + [f"month_{y}_{m:02d}" for y, m in spec.months])
        for k in range(spec.k_true):
            w.writerow([k] + [f"{p:.6f}" for p in syn.pattern_slot[k]] + [f"{syn.pattern_weekend[k]:.6f}"]
                       + [f"{p:.6f}" for p in syn.pattern_month[k]])

    cats = d / "cultural_categories.txt"
    cats.write_text("\n".join(syn.cultural_categories) + "\n")
    paths["cultural_categories"] = cats
    return paths


@dataclass
class CitySpec:
    """A city laid out directly in projected metres, for checking DSR maps
    against travel behaviour without running the upstream stages."""
    k: int = 4
    n_users: int = 4000
    venues_per_pattern: int = 15
    extent_m: float = 20000.0
    venue_spread_m: float = 2000.0       # Gaussian spread of venues about the centre
    pattern_radius_m: tuple[float, float] = (1000.0, 2000.0)
    checkins_per_user: int = 10
    venue_decay_m: float = 3000.0        # distance decay of venue choice
    seed: int = 0


@dataclass
class SyntheticCity:
    centre: np.ndarray          # (n_users, 2) activity centres
    user_pattern: np.ndarray
    radius_pattern: np.ndarray
    venue_xy: np.ndarray
    venue_pattern: np.ndarray
    event_user: np.ndarray
    event_venue: np.ndarray

    def profiles(self):
        from .poptics import UserActivityProfile
        return [UserActivityProfile(u, (float(c[0]), float(c[1])), 1.5 * float(r), float(r), int(z))
                for u, (c, r, z) in enumerate(zip(self.centre, self.radius_pattern, self.user_pattern))]

    def venue_visitors(self) -> list[np.ndarray]:
        order = np.argsort(self.event_venue, kind="stable")
        cuts = np.searchsorted(self.event_venue[order], np.arange(1, len(self.venue_xy)))
        return [np.unique(v) for v in np.split(self.event_user[order], cuts)]


def generate_city(spec: CitySpec, shuffled: bool = False) -> SyntheticCity:
    """Users spread uniformly, venues clustered about the centre, each user visiting
    venues of their own pattern with a distance-decaying preference.

    With ``shuffled`` every check-in becomes its own venue, placed at the user's
    centre plus the displacement of a check-in made by another user of the same
    pattern.  Venue placement then carries no information about the city layout.
    """
    rng = np.random.default_rng(spec.seed)
    half = spec.extent_m / 2.0
    n, m = spec.n_users, spec.checkins_per_user
    centre = rng.uniform(-half, half, (n, 2))
    pattern = rng.integers(spec.k, size=n)
    radius = rng.uniform(*spec.pattern_radius_m, n)
    vxy = np.clip(rng.normal(0.0, spec.venue_spread_m, (spec.k * spec.venues_per_pattern, 2)), -half, half)
    vpat = np.repeat(np.arange(spec.k), spec.venues_per_pattern)
    ev_u = np.repeat(np.arange(n), m)
    ev_v = np.empty(n * m, dtype=np.int64)
    for u in range(n):
        cand = np.flatnonzero(vpat == pattern[u])
        d = np.hypot(*(vxy[cand] - centre[u]).T)
        w = np.exp(-(d - d.min()) / spec.venue_decay_m)
        ev_v[u * m:(u + 1) * m] = rng.choice(cand, size=m, p=w / w.sum())
    if shuffled:
        donor = np.empty(n, dtype=np.int64)
        for z in range(spec.k):
            members = np.flatnonzero(pattern == z)
            donor[members] = rng.permutation(members)
        src = np.repeat(donor, m) * m + np.tile(np.arange(m), n)
        vxy = centre[ev_u] + (vxy[ev_v[src]] - centre[ev_u[src]])
        vpat = pattern[ev_u]
        ev_v = np.arange(n * m, dtype=np.int64)
    return SyntheticCity(centre, pattern, radius, vxy, vpat, ev_u, ev_v)
