import itertools
import math

import numpy as np
import pytest

import oracles
from culturemap import poptics
from culturemap.poptics import PopticsConfig, ReachabilityResult


def _blobs(gap=5000.0, spacing=10.0):
    """Two 2 x 5 lattices: every intra-blob step is exactly ``spacing``."""
    blob = np.array([[i * spacing, j * spacing] for i in range(5) for j in range(2)])
    return np.vstack([blob, blob + [gap, 0.0]])


@pytest.mark.parametrize("n,eta,k", [(2, 0.1, 1), (10, 0.1, 1), (30, 0.1, 3), (31, 0.1, 4), (5, 1.0, 4),
                                     (20, 0.25, 5), (1, 0.5, 1)])
def test_neighbour_rank(n, eta, k):
    assert poptics.neighbour_rank(n, eta) == k == oracles.neighbour_rank(n, eta)


def test_coincident_points_have_zero_core():
    assert poptics.core_distances([[3.0, 4.0], [3.0, 4.0]], 0.7).tolist() == [0.0, 0.0]


def test_collinear_core_distances():
    assert poptics.core_distances([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]], 0.3).tolist() == [1.0, 1.0, 2.0]


def test_single_point_core_is_zero():
    assert poptics.core_distances([[1.0, 1.0]], 0.1).tolist() == [0.0]


def test_core_distances_match_knn():
    rng = np.random.default_rng(1)
    xy = rng.uniform(-1000, 1000, (50, 2))
    for eta in (0.02, 0.1, 0.5, 1.0):
        np.testing.assert_allclose(poptics.core_distances(xy, eta), oracles.core_distances(xy.tolist(), eta),
                                   rtol=0, atol=1e-9)


def test_two_point_ordering():
    xy = [[0.0, 0.0], [3.0, 4.0]]
    core = poptics.core_distances(xy, 0.1)
    res = poptics.optics_order(xy, core)
    assert res.order.tolist() == [0, 1] and res.reach.tolist() == [0.0, max(core[0], 5.0)]


def test_ordering_matches_textbook_walk():
    rng = np.random.default_rng(2)
    for _ in range(30):
        xy = rng.uniform(-500, 500, (int(rng.integers(2, 40)), 2))
        core = poptics.core_distances(xy, 0.2)
        res = poptics.optics_order(xy, core)
        order, plot = oracles.optics(xy.tolist(), core.tolist())
        assert res.order.tolist() == order
        np.testing.assert_allclose(res.reach, plot, rtol=0, atol=1e-9)


def test_two_blobs_give_two_valleys():
    res = poptics.poptics(_blobs(), PopticsConfig(eta=0.1))
    big = np.flatnonzero(res.reach > 1000)
    assert big.tolist() == [10]
    assert res.reach[1:10].tolist() == [10.0] * 9 and res.reach[11:].tolist() == [10.0] * 9
    # the threshold sits between the intra-blob and the inter-blob scales
    assert res.reach[np.r_[1:10, 11:20]].max() < res.rd_th <= res.reach[10]


def test_two_blobs_clusters():
    res = poptics.poptics(_blobs(), PopticsConfig(eta=0.1))
    assert len(res.clusters) == 2
    first, second = (set(c.tolist()) for c in res.clusters)
    assert first == set(range(10))
    # the point that opens the second valley closes the first group and joins neither
    entry = int(res.order[10])
    assert entry >= 10 and second == set(range(10, 20)) - {entry}


def test_equal_reach_scores_zero():
    res = ReachabilityResult(np.arange(4), np.full(4, 2.0), np.zeros(4))
    poptics.select_threshold(res)
    assert res.rd_th == math.inf and res.score == 0.0 and not res.fallback


def test_threshold_scores_match_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        reach = np.round(rng.uniform(0, 10, int(rng.integers(1, 30))), 1)
        reach[0] = 0.0
        res = poptics.select_threshold(ReachabilityResult(np.arange(reach.size), reach, reach))
        want = oracles.threshold_choice(reach.tolist())
        if want is None:
            assert res.fallback and res.rd_th == math.inf
        else:
            assert res.rd_th == want[0] and res.score == pytest.approx(want[1], rel=1e-12, abs=1e-12)


def test_single_location_falls_back():
    res = poptics.poptics([[5.0, 5.0]])
    assert res.fallback and res.rd_th == math.inf
    assert [c.tolist() for c in res.clusters] == [[0]]


def test_extract_all_below():
    assert [c.tolist() for c in poptics.extract_clusters([2, 0, 1], [0.0, 1.0, 2.0], 5.0)] == [[2, 0, 1]]


def test_extract_alternating_gives_singletons():
    groups = poptics.extract_clusters(range(6), [0.0, 9.0, 1.0, 9.0, 1.0, 9.0], 5.0)
    assert [g.tolist() for g in groups] == [[0], [2], [4]]


def test_profile_of_one_spot():
    p = poptics.activity_profile(3, np.full((8, 2), 250.0), np.full((2, 2), 250.0), 1)
    assert p.centre == (250.0, 250.0) and p.radius_overall == 100.0 and p.radius_pattern == 100.0
    assert (p.user, p.pattern, p.flagged) == (3, 1, False)


def test_profile_ignores_outlier():
    rng = np.random.default_rng(4)
    blob = rng.normal(0.0, 30.0, (30, 2))
    xy = np.vstack([blob, [[20000.0, 0.0]]])
    p = poptics.activity_profile(0, xy, xy[:5], 0)
    assert np.hypot(*(np.array(p.centre) - blob.mean(axis=0))) < 15.0
    assert p.radius_overall < 200.0
    assert 100.0 <= p.radius_pattern <= p.radius_overall


def test_pattern_radius_only_counts_points_inside():
    # a 3 x 3 lattice of spacing 100 is one cluster centred on (100, 100)
    xy = np.array([[i * 100.0, j * 100.0] for i in range(3) for j in range(3)])
    p = poptics.activity_profile(0, xy, [[100.0, 220.0], [9000.0, 0.0]], 0)
    assert p.centre == (100.0, 100.0) and p.radius_overall == pytest.approx(100 * math.sqrt(2))
    assert p.radius_pattern == pytest.approx(120.0)


def test_largest_cluster_wins():
    rng = np.random.default_rng(5)
    small = rng.normal(0.0, 20.0, (8, 2))
    large = rng.normal(0.0, 20.0, (20, 2)) + [6000.0, 6000.0]
    p = poptics.activity_profile(0, np.vstack([small, large]), np.zeros((0, 2)), 0)
    assert np.hypot(p.centre[0] - 6000.0, p.centre[1] - 6000.0) < 30.0


def test_profile_is_deterministic():
    xy = _blobs() + np.random.default_rng(6).normal(0, 3, (20, 2))
    a = poptics.activity_profile(0, xy, xy[:3], 0)
    b = poptics.activity_profile(0, xy, xy[:3], 0)
    assert a == b


@pytest.mark.parametrize("kw", [dict(eta=0.0), dict(eta=1.5), dict(min_radius=0), dict(threshold_candidates="x")])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        PopticsConfig(**kw)


def test_profiles_csv_round_trip(tmp_path):
    profs = [poptics.UserActivityProfile(0, (1.5, -2.25), 300.0, 120.0, 2),
             poptics.UserActivityProfile(1, (0.1, 1e6), 100.0, 100.0, 0, True)]
    poptics.profiles_to_csv(profs, ["alice", "bob"], tmp_path / "p.csv")
    assert poptics.profiles_from_csv(tmp_path / "p.csv", ["alice", "bob"]) == profs


def test_reachability_csv(tmp_path):
    res = poptics.poptics([[0.0, 0.0], [3.0, 4.0]])
    poptics.reachability_to_csv(res, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines() == ["position,index,reach", "0,0,0.0", "1,1,5.0"]


def test_relabelling_keeps_reach_plot_for_the_same_start():
    # the walk starts at location 0, so only relabellings that keep the start fixed
    # can preserve the plot.  With rank 1 every reach is a plain distance; larger
    # ranks clamp several reach values to the same core distance and the index
    # tie-break then depends on the labelling.
    rng = np.random.default_rng(7)
    for _ in range(5):
        xy = rng.uniform(0, 100, (6, 2))
        ref = poptics.poptics(xy, PopticsConfig(eta=0.1))
        for rest in itertools.permutations(range(1, 6)):
            perm = [0, *rest]
            res = poptics.poptics(xy[perm], PopticsConfig(eta=0.1))
            assert res.reach.tolist() == ref.reach.tolist()
            assert [perm[i] for i in res.order] == ref.order.tolist()
