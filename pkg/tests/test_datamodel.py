from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

import oracles
from culturemap.datamodel import (FIVE_SLOTS, CheckIn, HourGranularity, Interner, InvalidRecord, TemporalToken,
                                  build_corpus, make_temporal_token, project, project_arrays, unproject,
                                  unproject_arrays)

BEIJING = (39.9042, 116.4074)
CST = 8 * 3600


def _epoch(y, mo, d, h, mi=0, tz=CST):
    return int(datetime(y, mo, d, h, mi, tzinfo=timezone(timedelta(seconds=tz))).timestamp())


def test_friday_evening_token():
    tok = make_temporal_token(_epoch(2017, 7, 21, 20, 15), CST)
    assert tok == TemporalToken(7, 5, 20)
    assert tok.label() == "JulFri20"


def test_midnight_new_year_monday():
    # 2018-01-01 was a Monday
    assert make_temporal_token(_epoch(2018, 1, 1, 0, 0, tz=0)) == TemporalToken(1, 1, 0)


def test_five_slot_evening():
    tok = make_temporal_token(_epoch(2017, 7, 21, 20, 15), CST, FIVE_SLOTS)
    assert FIVE_SLOTS.label(tok.hour_slot) == "evening"
    assert tok.label(FIVE_SLOTS) == "JulFrievening"


@pytest.mark.parametrize("hour,slot", [(0, "night"), (5, "night"), (6, "morning"), (10, "morning"),
                                       (11, "noon"), (14, "afternoon"), (18, "afternoon"), (19, "evening"),
                                       (23, "evening")])
def test_five_slot_boundaries(hour, slot):
    assert FIVE_SLOTS.label(FIVE_SLOTS.slot(hour)) == slot


def test_token_uses_local_time():
    # 23:30 UTC on a Sunday is 07:30 Monday in Beijing
    ts = _epoch(2017, 7, 23, 23, 30, tz=0)
    assert make_temporal_token(ts, 0) == TemporalToken(7, 7, 23)
    assert make_temporal_token(ts, CST) == TemporalToken(7, 1, 7)


def test_bad_timestamp_rejected():
    with pytest.raises(InvalidRecord, match="invalid timestamp"):
        make_temporal_token(float("nan"))
    with pytest.raises(InvalidRecord):
        make_temporal_token(10 ** 20)


@pytest.mark.parametrize("starts", [(), (1, 5), (0, 0, 3), (0, 24)])
def test_granularity_must_cover_the_day(starts):
    with pytest.raises(ValueError):
        HourGranularity(starts)


def test_granularity_spec_round_trip():
    for text in ("24", "five", "0,6,12,18"):
        assert HourGranularity.parse(text).spec() == text


def test_token_fields_checked():
    with pytest.raises(ValueError):
        TemporalToken(13, 1, 0)
    with pytest.raises(ValueError):
        TemporalToken(1, 0, 0)


def test_reference_projects_to_origin():
    p = project(*BEIJING, BEIJING)
    assert (p.x, p.y) == (0.0, 0.0)


def test_projection_north_matches_haversine():
    # frozen from the haversine oracle: 1111.9508 m
    p = project(BEIJING[0] + 0.01, BEIJING[1], BEIJING)
    assert p.x == 0.0
    assert p.y == pytest.approx(1111.9508023352598, rel=1e-6)


def test_projection_east_at_forty_degrees():
    # frozen from the haversine oracle: 851.8037 m
    p = project(40.0, 10.01, (40.0, 10.0))
    assert p.x == pytest.approx(851.8037327039477, rel=1e-4)
    assert p.y == 0.0


def test_projection_distance_error_within_100km():
    rng = np.random.default_rng(3)
    for _ in range(200):
        bearing, dist = rng.uniform(0, 2 * np.pi), rng.uniform(1000, 100000)
        lat = BEIJING[0] + np.degrees(dist * np.cos(bearing) / 6371008.8)
        lon = BEIJING[1] + np.degrees(dist * np.sin(bearing) / 6371008.8 / np.cos(np.radians(BEIJING[0])))
        p = project(lat, lon, BEIJING)
        truth = oracles.haversine(*BEIJING, lat, lon)
        assert abs(np.hypot(p.x, p.y) - truth) / truth < 0.005


def test_projection_round_trip_within_200km():
    rng = np.random.default_rng(4)
    lat = BEIJING[0] + rng.uniform(-1.8, 1.8, 500)
    lon = BEIJING[1] + rng.uniform(-2.3, 2.3, 500)
    back = unproject_arrays(project_arrays(lat, lon, BEIJING), BEIJING)
    assert np.abs(back - np.column_stack([lat, lon])).max() < 1e-6
    lat1, lon1 = unproject(project(lat[0], lon[0], BEIJING), BEIJING)
    assert abs(lat1 - lat[0]) < 1e-9 and abs(lon1 - lon[0]) < 1e-9


def test_projection_rejects_bad_coordinates():
    with pytest.raises(ValueError):
        project(91.0, 0.0, BEIJING)


def test_checkin_validates_coordinates():
    with pytest.raises(InvalidRecord, match="coordinate out of range"):
        CheckIn("u", "v", "c", 95.0, 0.0, 0)


def test_interner_is_dense_and_stable():
    it = Interner(["b", "a", "b", "c"])
    assert it.items == ["b", "a", "c"]
    assert [it.index(x) for x in "bac"] == [0, 1, 2]
    assert it.intern("a") == 1 and len(it) == 3 and "z" not in it


def test_build_corpus_orders_events_per_user():
    t0 = _epoch(2017, 7, 21, 20)
    rows = [CheckIn("u2", "v1", "museum", 39.9, 116.4, t0 + 50),
            CheckIn("u1", "v2", "theatre", 39.91, 116.41, t0 + 10),
            CheckIn("u2", "v1", "museum", 39.9, 116.4, t0),
            CheckIn("u1", "v1", "museum", 39.9, 116.4, t0 + 3600 * 24)]
    c = build_corpus(rows, tz_offset=CST, reference=BEIJING)
    c.validate()
    assert c.users == ["u1", "u2"] and c.categories == ["museum", "theatre"]
    assert c.event_user.tolist() == [0, 0, 1, 1]
    assert c.event_ts.tolist() == [t0 + 10, t0 + 3600 * 24, t0, t0 + 50]
    assert c.time_labels() == ["JulFri20", "JulSat20"]
    assert [s.stop - s.start for s in c.user_slices()] == [2, 2]


def test_corpus_validate_catches_bad_index():
    rows = [CheckIn("u", "v", "c", 0.0, 0.0, 0), CheckIn("u", "v", "c", 0.0, 0.0, 1)]
    c = build_corpus(rows)
    c.event_category[0] = 5
    with pytest.raises(ValueError, match="event_category"):
        c.validate()
    c.event_category[0] = 0
    with pytest.raises(ValueError, match="minimum"):
        c.validate(min_checkins=3)
