"""Shared domain types: check-ins, temporal tokens, the indexed corpus, projection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6371008.8

MONTH_ABBR = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
DOW_ABBR = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class InvalidRecord(ValueError):
    """A single check-in failed validation; ``reason`` is the report key."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class CheckIn:
    user_id: str
    venue_id: str
    category_id: str
    lat: float
    lon: float
    timestamp: int  # epoch seconds, UTC

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise InvalidRecord("coordinate out of range", f"({self.lat}, {self.lon})")
        check_timestamp(self.timestamp)


def check_timestamp(ts) -> int:
    try:
        ts_int = int(ts)
        if isinstance(ts, float) and not math.isfinite(ts):
            raise ValueError
        datetime.fromtimestamp(ts_int, tz=timezone.utc)
    except (TypeError, ValueError, OverflowError, OSError):
        raise InvalidRecord("invalid timestamp", repr(ts)) from None
    return ts_int


@dataclass(frozen=True)
class HourGranularity:
    """Maps the 24 hours of a day onto ``H`` contiguous slots.

    ``starts`` holds the first hour of every slot, beginning with 0.
    """

    starts: tuple[int, ...] = tuple(range(24))
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        s = self.starts
        if not s or s[0] != 0 or any(b <= a for a, b in zip(s, s[1:])) or s[-1] > 23:
            raise ValueError(f"slot starts must be strictly increasing from 0 within 0..23, got {s}")
        if self.labels is not None and len(self.labels) != len(s):
            raise ValueError("one label per slot required")

    @property
    def n_slots(self) -> int:
        return len(self.starts)

    def slot(self, hour: int) -> int:
        k = 0
        for i, start in enumerate(self.starts):
            if hour >= start:
                k = i
        return k

    def label(self, slot: int) -> str:
        if self.labels is not None:
            return self.labels[slot]
        if self.n_slots == 24:
            return f"{slot:02d}"
        return f"h{self.starts[slot]:02d}"

    @classmethod
    def parse(cls, text: str) -> "HourGranularity":
        """``"24"`` for hourly slots, ``"five"`` for the named 5-slot scheme,
        or a comma-separated list of slot start hours."""
        text = text.strip()
        if text == "24":
            return cls()
        if text == "five":
            return FIVE_SLOTS
        return cls(tuple(int(p) for p in text.split(",")))

    def spec(self) -> str:
        if self == FIVE_SLOTS:
            return "five"
        if self.starts == tuple(range(24)):
            return "24"
        return ",".join(str(s) for s in self.starts)


FIVE_SLOTS = HourGranularity((0, 6, 11, 14, 19), ("night", "morning", "noon", "afternoon", "evening"))


@dataclass(frozen=True, order=True)
class TemporalToken:
    month: int        # 1..12
    day_of_week: int  # 1..7, Monday = 1
    hour_slot: int    # 0..H-1

    def __post_init__(self):
        if not (1 <= self.month <= 12 and 1 <= self.day_of_week <= 7 and self.hour_slot >= 0):
            raise ValueError(f"invalid temporal token {self.month}/{self.day_of_week}/{self.hour_slot}")

    def token_id(self, n_slots: int) -> int:
        return ((self.month - 1) * 7 + (self.day_of_week - 1)) * n_slots + self.hour_slot

    @classmethod
    def from_id(cls, token_id: int, n_slots: int) -> "TemporalToken":
        if not 0 <= token_id < 12 * 7 * n_slots:
            raise ValueError(f"token id {token_id} out of range for {n_slots} slots")
        md, slot = divmod(token_id, n_slots)
        m, d = divmod(md, 7)
        return cls(m + 1, d + 1, slot)

    def label(self, granularity: HourGranularity = HourGranularity()) -> str:
        return f"{MONTH_ABBR[self.month - 1]}{DOW_ABBR[self.day_of_week - 1]}{granularity.label(self.hour_slot)}"


def make_temporal_token(timestamp: int, tz_offset: int = 0,
                        granularity: HourGranularity = HourGranularity()) -> TemporalToken:
    ts = check_timestamp(timestamp)
    local = datetime.fromtimestamp(ts + int(tz_offset), tz=timezone.utc)
    return TemporalToken(local.month, local.isoweekday(), granularity.slot(local.hour))


@dataclass(frozen=True)
class ProjectedPoint:
    x: float  # metres east
    y: float  # metres north


def _check_range(lat, lon):
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise ValueError(f"coordinate out of range: ({lat}, {lon})")


def project(lat: float, lon: float, reference: tuple[float, float]) -> ProjectedPoint:
    """Local equirectangular projection about ``reference`` (lat, lon)."""
    _check_range(lat, lon)
    lat0, lon0 = reference
    _check_range(lat0, lon0)
    x = EARTH_RADIUS_M * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * math.radians(lat - lat0)
    return ProjectedPoint(x, y)


def unproject(point: ProjectedPoint, reference: tuple[float, float]) -> tuple[float, float]:
    lat0, lon0 = reference
    lat = lat0 + math.degrees(point.y / EARTH_RADIUS_M)
    lon = lon0 + math.degrees(point.x / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat, lon


def project_arrays(lat, lon, reference: tuple[float, float]) -> np.ndarray:
    """Vectorised :func:`project`; returns an ``(n, 2)`` array of (x, y)."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    lat0, lon0 = reference
    x = EARTH_RADIUS_M * np.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * np.radians(lat - lat0)
    return np.column_stack([x, y])


def unproject_arrays(xy, reference: tuple[float, float]) -> np.ndarray:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    lat0, lon0 = reference
    lat = lat0 + np.degrees(xy[:, 1] / EARTH_RADIUS_M)
    lon = lon0 + np.degrees(xy[:, 0] / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return np.column_stack([lat, lon])


class Interner:
    """Bijective string <-> dense index mapping."""

    def __init__(self, items: Iterable[str] = ()):
        self._index: dict[str, int] = {}
        self.items: list[str] = []
        for it in items:
            self.intern(it)

    def intern(self, item: str) -> int:
        idx = self._index.get(item)
        if idx is None:
            idx = len(self.items)
            self._index[item] = idx
            self.items.append(item)
        return idx

    def index(self, item: str) -> int:
        return self._index[item]

    def __contains__(self, item) -> bool:
        return item in self._index

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class Corpus:
    """Filtered cultural check-ins of retained users, indexed for the sampler.

    Event arrays are grouped by user (in ``users`` order) and chronological within
    each user.  ``side_*`` arrays hold the same users' non-cultural check-ins,
    which only the activity-centre clustering uses.
    """

    users: list[str]
    categories: list[str]
    time_tokens: list[int]          # global token ids of observed tokens, ascending
    venues: list[str]
    event_user: np.ndarray          # int32, index into users
    event_time: np.ndarray          # int32, index into time_tokens
    event_category: np.ndarray      # int32, index into categories
    event_venue: np.ndarray         # int32, index into venues
    event_lat: np.ndarray
    event_lon: np.ndarray
    event_ts: np.ndarray            # int64 epoch seconds
    venue_lat: np.ndarray
    venue_lon: np.ndarray
    venue_category: np.ndarray      # int32, category of each venue
    side_user: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int32))
    side_lat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    side_lon: np.ndarray = field(default_factory=lambda: np.zeros(0))
    side_ts: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    tz_offset: int = 0
    granularity: HourGranularity = HourGranularity()
    reference: tuple[float, float] = (0.0, 0.0)

    @property
    def n_events(self) -> int:
        return int(self.event_user.shape[0])

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def n_times(self) -> int:
        return len(self.time_tokens)

    def user_slices(self) -> list[slice]:
        """Contiguous event range of every user."""
        bounds = np.searchsorted(self.event_user, np.arange(self.n_users + 1))
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def time_labels(self) -> list[str]:
        h = self.granularity.n_slots
        return [TemporalToken.from_id(t, h).label(self.granularity) for t in self.time_tokens]

    def validate(self, min_checkins: int = 1) -> None:
        n = self.n_events
        for name, arr, bound in (("event_user", self.event_user, self.n_users),
                                 ("event_time", self.event_time, self.n_times),
                                 ("event_category", self.event_category, self.n_categories),
                                 ("event_venue", self.event_venue, len(self.venues))):
            if arr.shape[0] != n:
                raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
            if n and (arr.min() < 0 or arr.max() >= bound):
                raise ValueError(f"{name} index outside [0, {bound})")
        if n and np.any(np.diff(self.event_user) < 0):
            raise ValueError("events are not grouped by user")
        for s in self.user_slices():
            if s.stop - s.start < min_checkins:
                raise ValueError("user below the minimum check-in count")
            if np.any(np.diff(self.event_ts[s]) < 0):
                raise ValueError("per-user events are not chronological")


def build_corpus(checkins: Sequence[CheckIn], side: Sequence[CheckIn] = (), *,
                 tz_offset: int = 0, granularity: HourGranularity = HourGranularity(),
                 reference: tuple[float, float] = (0.0, 0.0)) -> Corpus:
    """Index cultural ``checkins`` (and the users' non-cultural ``side`` records).

    Users, categories and venues are sorted by id and time tokens by token id, so
    the result does not depend on input order except for equal-timestamp ties.
    """
    users = sorted({c.user_id for c in checkins})
    categories = sorted({c.category_id for c in checkins})
    venues = sorted({c.venue_id for c in checkins})
    uidx = {u: i for i, u in enumerate(users)}
    cidx = {c: i for i, c in enumerate(categories)}
    vidx = {v: i for i, v in enumerate(venues)}
    h = granularity.n_slots
    tok = [make_temporal_token(c.timestamp, tz_offset, granularity).token_id(h) for c in checkins]
    time_tokens = sorted(set(tok))
    tidx = {t: i for i, t in enumerate(time_tokens)}

    order = sorted(range(len(checkins)), key=lambda i: (uidx[checkins[i].user_id], checkins[i].timestamp))
    ev = [checkins[i] for i in order]
    venue_lat = np.zeros(len(venues))
    venue_lon = np.zeros(len(venues))
    venue_cat = np.zeros(len(venues), np.int32)
    for c in ev:
        j = vidx[c.venue_id]
        venue_lat[j], venue_lon[j], venue_cat[j] = c.lat, c.lon, cidx[c.category_id]

    side_kept = [c for c in side if c.user_id in uidx]
    side_kept.sort(key=lambda c: (uidx[c.user_id], c.timestamp))
    return Corpus(
        users=users, categories=categories, time_tokens=time_tokens, venues=venues,
        event_user=np.array([uidx[c.user_id] for c in ev], np.int32),
        event_time=np.array([tidx[tok[i]] for i in order], np.int32),
        event_category=np.array([cidx[c.category_id] for c in ev], np.int32),
        event_venue=np.array([vidx[c.venue_id] for c in ev], np.int32),
        event_lat=np.array([c.lat for c in ev], float),
        event_lon=np.array([c.lon for c in ev], float),
        event_ts=np.array([c.timestamp for c in ev], np.int64),
        venue_lat=venue_lat, venue_lon=venue_lon, venue_category=venue_cat,
        side_user=np.array([uidx[c.user_id] for c in side_kept], np.int32),
        side_lat=np.array([c.lat for c in side_kept], float),
        side_lon=np.array([c.lon for c in side_kept], float),
        side_ts=np.array([c.timestamp for c in side_kept], np.int64),
        tz_offset=int(tz_offset), granularity=granularity, reference=tuple(reference),
    )
