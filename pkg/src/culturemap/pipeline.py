"""Stage glue shared by the CLI and end-to-end tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import coherence, dsi, poptics, tlda, validate
from .datamodel import Corpus, project_arrays

log = logging.getLogger(__name__)


@dataclass
class ChainResult:
    model: tlda.TldaModel
    chain: int
    tcv: float
    scores: list[float]


def fit_best_chain(corpus: Corpus, hp: tlda.TldaHyperparams, chains: int = 1,
                   config: coherence.CoherenceConfig = coherence.CoherenceConfig(),
                   counts: coherence.SlidingWindowCounts | None = None) -> ChainResult:
    """Fit ``chains`` independent chains and keep the one with the highest TCV
    (earliest chain on ties)."""
    counts = counts if counts is not None else coherence.build_windows(corpus, config.window_size)
    best, scores = None, []
    for c, seed in enumerate(coherence.chain_seeds(hp.seed, chains)):
        model = tlda.fit(corpus, replace(hp, seed=seed))
        s = coherence.model_tcv(model, counts, config).score
        scores.append(s)
        if best is None or s > best[2]:
            best = (model, c, s)
    return ChainResult(best[0], best[1], best[2], scores)


def event_xy(corpus: Corpus) -> np.ndarray:
    return project_arrays(corpus.event_lat, corpus.event_lon, corpus.reference)


def side_xy(corpus: Corpus) -> np.ndarray:
    return project_arrays(corpus.side_lat, corpus.side_lon, corpus.reference)


def venue_xy(corpus: Corpus) -> np.ndarray:
    return project_arrays(corpus.venue_lat, corpus.venue_lon, corpus.reference)


def category_patterns(dists: tlda.PatternDistributions) -> np.ndarray:
    """Pattern of every category: argmax over its column of phi."""
    return np.argmax(dists.phi, axis=0)


def user_locations(corpus: Corpus):
    """Per user: all check-in locations (cultural and other) in chronological
    order, and the event indices of the cultural ones."""
    exy, sxy = event_xy(corpus), side_xy(corpus)
    ev = np.argsort(corpus.event_user, kind="stable")
    sv = np.argsort(corpus.side_user, kind="stable")
    ev_bounds = np.searchsorted(corpus.event_user[ev], np.arange(corpus.n_users + 1))
    sv_bounds = np.searchsorted(corpus.side_user[sv], np.arange(corpus.n_users + 1))
    for u in range(corpus.n_users):
        e = ev[ev_bounds[u]:ev_bounds[u + 1]]
        s = sv[sv_bounds[u]:sv_bounds[u + 1]]
        ts = np.concatenate([corpus.event_ts[e], corpus.side_ts[s]])
        xy = np.concatenate([exy[e], sxy[s]])
        order = np.argsort(ts, kind="stable")
        yield u, xy[order], e, exy[e]


def build_profiles(corpus: Corpus, model: tlda.TldaModel,
                   config: poptics.PopticsConfig = poptics.PopticsConfig(),
                   reachability: dict | None = None) -> list[poptics.UserActivityProfile]:
    """POPTICS over every user's full check-in history; the pattern radius uses the
    user's cultural check-ins sampled into their assigned pattern."""
    patterns = tlda.assign_all(tlda.distributions(model))
    out = []
    for u, xy, events, cultural_xy in user_locations(corpus):
        z = int(patterns[u])
        result = poptics.poptics(xy, config)
        if reachability is not None:
            reachability[u] = result
        mine = model.z_assign[events] == z
        out.append(poptics.activity_profile(u, xy, cultural_xy[mine], z, config, result))
    n_flag = sum(p.flagged for p in out)
    if n_flag:
        log.warning("profiles: %d users without a cluster (centre = global centroid)", n_flag)
    return out


def venue_visitors(corpus: Corpus) -> list[np.ndarray]:
    pairs = np.unique(np.column_stack([corpus.event_venue, corpus.event_user]), axis=0)
    bounds = np.searchsorted(pairs[:, 0], np.arange(len(corpus.venues) + 1))
    return [pairs[bounds[j]:bounds[j + 1], 1] for j in range(len(corpus.venues))]


def build_venues(corpus: Corpus, model: tlda.TldaModel, profiles, sigma_floor: float = 100.0):
    cat_pattern = category_patterns(tlda.distributions(model))
    centres = np.array([p.centre for p in sorted(profiles, key=lambda p: p.user)])
    return dsi.venue_profiles(venue_xy(corpus), cat_pattern[corpus.venue_category],
                              venue_visitors(corpus), centres, sigma_floor)


def build_dsr(corpus: Corpus, model: tlda.TldaModel, profiles, cell_size: float = 400.0,
              sigma_floor: float = 100.0, supply_eps: float = 1e-12):
    venues = build_venues(corpus, model, profiles, sigma_floor)
    pts = np.vstack([np.array([p.centre for p in profiles]).reshape(-1, 2),
                     np.array([v.location for v in venues]).reshape(-1, 2)])
    spec = dsi.GridSpec.covering(pts, cell_size)
    return dsi.build_grid(profiles, venues, spec, range(model.K), supply_eps), venues


def correlations(corpus: Corpus, profiles, venues, grid: dsi.DsrGrid, per_user: bool = False):
    vxy = np.array([v.location for v in venues])
    vpat = np.array([v.pattern for v in venues])
    records, omitted = validate.travel_distances(corpus.event_user, corpus.event_venue, vxy, vpat, profiles)
    if omitted:
        log.info("validate: %d users without a check-in at a venue of their pattern", omitted)
    rows = [validate.dsr_travel_correlation(records, profiles, grid, z, per_user) for z in sorted(grid.dsr)]
    return rows, records, omitted
