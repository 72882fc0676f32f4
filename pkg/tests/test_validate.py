import math

import numpy as np
import pytest

import oracles
from culturemap import validate
from culturemap.dsi import DsrGrid, GridSpec
from culturemap.poptics import UserActivityProfile


def _profile(u, x, y, z=0):
    return UserActivityProfile(u, (x, y), 500.0, 200.0, z)


def test_travel_to_a_venue_at_the_centre():
    recs, omitted = validate.travel_distances([0], [0], [[5.0, 5.0]], [0], [_profile(0, 5.0, 5.0)])
    assert recs[0].mean_travel == 0.0 and omitted == 0


def test_travel_is_a_mean_over_checkins():
    recs, _ = validate.travel_distances([0, 0], [0, 1], [[1000.0, 0.0], [0.0, 3000.0]], [0, 0],
                                        [_profile(0, 0.0, 0.0)])
    assert recs[0].mean_travel == 2000.0


def test_other_pattern_venues_ignored_and_users_omitted():
    recs, omitted = validate.travel_distances([0, 1], [0, 1], [[10.0, 0.0], [20.0, 0.0]], [1, 0],
                                              [_profile(0, 0.0, 0.0), _profile(1, 0.0, 0.0)])
    assert [r.user for r in recs] == [1] and omitted == 1


def test_travel_matches_direct_recomputation():
    rng = np.random.default_rng(0)
    vxy = rng.uniform(-5000, 5000, (12, 2))
    vpat = rng.integers(0, 2, 12)
    profiles = [_profile(u, *rng.uniform(-5000, 5000, 2), z=int(rng.integers(2))) for u in range(8)]
    ev_u = rng.integers(0, 8, 200)
    ev_v = rng.integers(0, 12, 200)
    recs, omitted = validate.travel_distances(ev_u, ev_v, vxy, vpat, profiles)
    for r in recs:
        p = profiles[r.user]
        d = [math.dist(p.centre, vxy[v]) for u, v in zip(ev_u, ev_v) if u == r.user and vpat[v] == p.pattern]
        assert r.mean_travel == pytest.approx(sum(d) / len(d), rel=1e-12)
    assert omitted == 8 - len(recs)


def test_pearson_line_and_oracle():
    assert validate.pearson([1, 2, 3, 4], [3, 5, 7, 9]) == 1.0
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=40), rng.normal(size=40)
    assert validate.pearson(x, y) == pytest.approx(oracles.pearson(x.tolist(), y.tolist()), abs=1e-12)


def test_pearson_independent_noise():
    rng = np.random.default_rng(2)
    assert abs(validate.pearson(rng.normal(size=1000), rng.normal(size=1000))) < 0.1


def test_pearson_undefined():
    assert math.isnan(validate.pearson([1, 2], [1, 2]))
    assert math.isnan(validate.pearson([1, 1, 1], [1, 2, 3]))


def _grid(values):
    spec = GridSpec((0.0, 0.0), 100.0, len(values), 1)
    return DsrGrid(spec, dsr={0: np.array(values, float)})


def test_cell_level_pairs_average_travel():
    grid = _grid([1.0, 2.0, np.nan, 4.0])
    profiles = [_profile(0, 50.0, 50.0), _profile(1, 60.0, 50.0), _profile(2, 150.0, 50.0),
                _profile(3, 250.0, 50.0), _profile(4, 350.0, 50.0), _profile(5, -50.0, 50.0)]
    recs = [validate.TravelRecord(u, 0, t) for u, t in enumerate([10.0, 30.0, 5.0, 7.0, 9.0, 1.0])]
    x, y = validate.correlation_pairs(recs, profiles, grid, 0)
    # the NaN cell and the user outside the grid drop out
    assert x.tolist() == [1.0, 2.0, 4.0] and y.tolist() == [20.0, 5.0, 9.0]
    x, y = validate.correlation_pairs(recs, profiles, grid, 0, per_user=True)
    assert x.tolist() == [1.0, 1.0, 2.0, 4.0] and y.tolist() == [10.0, 30.0, 5.0, 9.0]


def test_correlation_reports_reasons(tmp_path):
    grid = _grid([1.0, 2.0, 3.0])
    profiles = [_profile(u, 50.0 + 100 * u, 50.0) for u in range(3)]
    few = validate.dsr_travel_correlation([validate.TravelRecord(0, 0, 1.0)], profiles, grid, 0)
    assert math.isnan(few.r) and few.reason == "fewer than 3 pairs"
    flat = validate.dsr_travel_correlation([validate.TravelRecord(u, 0, 5.0) for u in range(3)], profiles, grid, 0)
    assert math.isnan(flat.r) and flat.reason == "zero variance"
    good = validate.dsr_travel_correlation([validate.TravelRecord(u, 0, 2.0 * u) for u in range(3)], profiles, grid, 0)
    assert good.r == 1.0 and good.n == 3
    validate.correlations_to_csv([good, few], tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == ["pattern,pearson_r,n,note", "0,1.0,3,",
                                                             "0,,1,fewer than 3 pairs"]


def test_missing_pattern_gives_no_pairs():
    x, y = validate.correlation_pairs([], [], _grid([1.0]), 3)
    assert x.size == 0 and y.size == 0
