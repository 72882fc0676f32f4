"""Check-in CSV parsing, the cultural-fan filter and the calendar heatmap."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .datamodel import CheckIn, Corpus, HourGranularity, InvalidRecord, build_corpus

log = logging.getLogger(__name__)

CSV_FIELDS = ("user_id", "venue_id", "category", "lat", "lon", "timestamp")


class EmptyCorpusError(ValueError):
    pass


@dataclass
class IngestConfig:
    min_checkins: int = 20
    category_whitelist: frozenset[str] | None = None
    tz_offset: int = 0
    hour_granularity: HourGranularity = HourGranularity()
    reference_point: tuple[float, float] = (39.9042, 116.4074)

    def __post_init__(self):
        if self.min_checkins < 1:
            raise ValueError("min_checkins must be >= 1")
        if self.category_whitelist is not None:
            self.category_whitelist = frozenset(self.category_whitelist)

    def is_cultural(self, category: str) -> bool:
        return self.category_whitelist is None or category in self.category_whitelist


@dataclass
class RejectionReport:
    rows_read: int = 0
    accepted: int = 0
    reasons: Counter = field(default_factory=Counter)

    @property
    def rejected(self) -> int:
        return sum(self.reasons.values())

    def add(self, reason: str) -> None:
        self.reasons[reason] += 1

    def lines(self) -> list[str]:
        out = [f"rows_read\t{self.rows_read}", f"accepted\t{self.accepted}"]
        out += [f"{reason}\t{n}" for reason, n in sorted(self.reasons.items())]
        return out

    def write(self, path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")


def parse_timestamp(text: str, tz_offset: int = 0) -> int:
    """RFC 3339 to epoch seconds.  A timestamp without an offset is local time at
    ``tz_offset``."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise InvalidRecord("invalid timestamp", text) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone(timedelta(seconds=tz_offset)))
    return int(dt.timestamp())


def parse_row(row: dict, tz_offset: int = 0) -> CheckIn:
    try:
        values = [row[k] for k in CSV_FIELDS]
    except KeyError:
        raise InvalidRecord("missing field") from None
    if any(v is None or str(v).strip() == "" for v in values):
        raise InvalidRecord("missing field")
    try:
        lat, lon = float(row["lat"]), float(row["lon"])
    except ValueError:
        raise InvalidRecord("malformed coordinate") from None
    ts = parse_timestamp(row["timestamp"], tz_offset)
    return CheckIn(row["user_id"].strip(), row["venue_id"].strip(), row["category"].strip(), lat, lon, ts)


def iter_checkins(path, config: IngestConfig, report: RejectionReport | None = None) -> Iterator[CheckIn]:
    """Stream valid check-ins from ``path``; malformed rows are counted in ``report``."""
    report = report if report is not None else RejectionReport()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(CSV_FIELDS) <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain {', '.join(CSV_FIELDS)}")
        for row in reader:
            report.rows_read += 1
            try:
                rec = parse_row(row, config.tz_offset)
            except InvalidRecord as exc:
                report.add(exc.reason)
                continue
            report.accepted += 1
            yield rec


def load_checkins(path, config: IngestConfig) -> tuple[list[CheckIn], RejectionReport]:
    report = RejectionReport()
    return list(iter_checkins(path, config, report)), report


def _qualifying_users(counts: Counter, min_checkins: int) -> set[str]:
    return {u for u, n in counts.items() if n >= min_checkins}


def filter_fans(checkins: Iterable[CheckIn], config: IngestConfig) -> Corpus:
    """Keep users with at least ``min_checkins`` cultural check-ins."""
    checkins = list(checkins)
    if not checkins:
        raise EmptyCorpusError("no check-ins to filter")
    counts = Counter(c.user_id for c in checkins if config.is_cultural(c.category_id))
    keep = _qualifying_users(counts, config.min_checkins)
    return _assemble(
        [c for c in checkins if c.user_id in keep and config.is_cultural(c.category_id)],
        [c for c in checkins if c.user_id in keep and not config.is_cultural(c.category_id)],
        config)


def corpus_from_file(path, config: IngestConfig) -> tuple[Corpus, RejectionReport]:
    """Two-pass ingest: count cultural check-ins per user, then materialise only
    the retained users' rows."""
    counts: Counter = Counter()
    report = RejectionReport()
    for c in iter_checkins(path, config, report):
        if config.is_cultural(c.category_id):
            counts[c.user_id] += 1
    keep = _qualifying_users(counts, config.min_checkins)
    if not keep:
        raise EmptyCorpusError(f"no user has {config.min_checkins} or more cultural check-ins")
    cultural, side = [], []
    for c in iter_checkins(path, config):
        if c.user_id in keep:
            (cultural if config.is_cultural(c.category_id) else side).append(c)
    log.info("ingest: %d rows, %d rejected, %d fans, %d cultural events",
             report.rows_read, report.rejected, len(keep), len(cultural))
    return _assemble(cultural, side, config), report


def _assemble(cultural: list[CheckIn], side: list[CheckIn], config: IngestConfig) -> Corpus:
    if not cultural:
        raise EmptyCorpusError(f"no user has {config.min_checkins} or more cultural check-ins")
    return build_corpus(cultural, side, tz_offset=config.tz_offset,
                        granularity=config.hour_granularity, reference=config.reference_point)


@dataclass
class CalendarHeatmap:
    dates: list[date]
    counts: np.ndarray  # (n_dates, 24)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date"] + [f"{h:02d}" for h in range(24)])
            for d, row in zip(self.dates, self.counts):
                w.writerow([d.isoformat()] + [int(x) for x in row])


def calendar_heatmap(corpus: Corpus) -> CalendarHeatmap:
    """Check-in counts by local date (every date from first to last) and hour."""
    if corpus.n_events == 0:
        return CalendarHeatmap([], np.zeros((0, 24), np.int64))
    local = corpus.event_ts.astype(np.int64) + corpus.tz_offset
    day = np.floor_divide(local, 86400)
    hour = np.floor_divide(local - day * 86400, 3600)
    first = int(day.min())
    n_days = int(day.max()) - first + 1
    counts = np.zeros((n_days, 24), np.int64)
    np.add.at(counts, (day - first, hour), 1)
    epoch = date(1970, 1, 1)
    return CalendarHeatmap([epoch + timedelta(days=first + i) for i in range(n_days)], counts)
