"""Coherence of fitted patterns: the temporal coherence value (TCV) used to pick
the number of patterns, and the standard venue-only CV used to compare TLDA
against plain LDA.

All probabilities are boolean occurrence frequencies over sliding windows of
each user's chronological check-ins.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import tlda
from .datamodel import Corpus

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoherenceConfig:
    epsilon: float = 1e-12
    tau: float = 1.0
    top_n_venues: int = 10
    top_n_times: int = 10
    venue_threshold: float | None = None  # if set, top venues are those with phi above it
    window_size: int = 10

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.window_size < 2:
            raise ValueError("window_size must be >= 2")
        if self.top_n_venues < 1 or self.top_n_times < 1:
            raise ValueError("top-n sizes must be positive")


@dataclass
class SlidingWindowCounts:
    window_size: int
    window_total: int
    occur_v: np.ndarray   # (V,) windows containing each category
    occur_t: np.ndarray   # (T,) windows containing each time token
    co_vt: np.ndarray     # (V, T) windows containing both
    co_vv: np.ndarray     # (V, V) windows containing both categories; diagonal = occur_v


def window_starts(lengths: np.ndarray, window_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Global start offset and length of every window, sliding by one inside each user."""
    starts, sizes = [], []
    offset = 0
    for n in lengths.tolist():
        if n == 0:
            continue
        if n <= window_size:
            starts.append(np.array([offset]))
            sizes.append(np.array([n]))
        else:
            m = n - window_size + 1
            starts.append(offset + np.arange(m))
            sizes.append(np.full(m, window_size))
        offset += n
    if not starts:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(starts), np.concatenate(sizes)


def _incidence(starts, sizes, tokens, n_tokens) -> sparse.csr_matrix:
    rows = np.repeat(np.arange(starts.size), sizes)
    within = np.arange(rows.size) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    cols = tokens[np.repeat(starts, sizes) + within]
    m = sparse.csr_matrix((np.ones(rows.size, np.int64), (rows, cols)), shape=(starts.size, n_tokens))
    m.sum_duplicates()
    m.data[:] = 1  # boolean occurrence
    return m


def build_windows(corpus: Corpus, window_size: int = 10) -> SlidingWindowCounts:
    if corpus.n_events == 0:
        raise ValueError("empty corpus")
    if window_size < 1:
        raise ValueError("window_size must be positive")
    lengths = np.bincount(corpus.event_user, minlength=corpus.n_users)
    starts, sizes = window_starts(lengths, window_size)
    wv = _incidence(starts, sizes, corpus.event_category, corpus.n_categories)
    wt = _incidence(starts, sizes, corpus.event_time, corpus.n_times)
    return SlidingWindowCounts(
        window_size=window_size, window_total=int(starts.size),
        occur_v=np.asarray(wv.sum(axis=0)).ravel(), occur_t=np.asarray(wt.sum(axis=0)).ravel(),
        co_vt=(wv.T @ wt).toarray(), co_vv=(wv.T @ wv).toarray())


def npmi_value(p_joint: float, p_a: float, p_b: float, epsilon: float = 1e-12, tau: float = 1.0) -> float:
    """Smoothed NPMI raised to ``tau`` (sign kept for negative values).

    Joint certainty (``p_joint == 1``) and a zero marginal both give 0.  The
    smoothing term can push a near-perfect association a hair past 1, so the
    value is clipped to [-1, 1] before the exponent.
    """
    if p_a <= 0.0 or p_b <= 0.0 or p_joint >= 1.0:
        return 0.0
    num = math.log((p_joint + epsilon) / (p_a * p_b))
    den = -math.log(p_joint + epsilon)
    x = max(-1.0, min(1.0, num / den))
    return math.copysign(abs(x) ** tau, x) if tau != 1.0 else x


def npmi_matrix(co: np.ndarray, occ_a: np.ndarray, occ_b: np.ndarray, total: int,
                epsilon: float = 1e-12, tau: float = 1.0) -> np.ndarray:
    """Vectorised :func:`npmi_value` over every pair (rows from ``occ_a``, columns from ``occ_b``)."""
    pj = np.asarray(co, float) / total
    pa = (np.asarray(occ_a, float) / total)[:, None]
    pb = (np.asarray(occ_b, float) / total)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.log((pj + epsilon) / (pa * pb)) / -np.log(pj + epsilon)
    x = np.clip(np.where((pa > 0) & (pb > 0) & (pj < 1.0), x, 0.0), -1.0, 1.0)
    if tau != 1.0:
        x = np.sign(x) * np.abs(x) ** tau
    return x


def npmi(v: int, t: int, counts: SlidingWindowCounts, config: CoherenceConfig = CoherenceConfig()) -> float:
    q = counts.window_total
    return npmi_value(counts.co_vt[v, t] / q, counts.occur_v[v] / q, counts.occur_t[t] / q,
                      config.epsilon, config.tau)


def _cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        return None
    return max(-1.0, min(1.0, float(a @ b) / (na * nb)))


@dataclass
class CoherenceResult:
    score: float
    segment_scores: list[float] = field(default_factory=list)
    zero_vectors: int = 0


def _aggregate(blocks) -> CoherenceResult:
    """``blocks`` yields one (n_top, n_context) NPMI matrix per pattern; each row
    is compared with the column sums of its block."""
    scores, zeros = [], 0
    for block in blocks:
        agg = block.sum(axis=0)
        for row in block:
            m = _cosine(row, agg)
            if m is None:
                zeros += 1
                m = 0.0
            scores.append(m)
    if not scores:
        raise ValueError("no segments to score")
    return CoherenceResult(float(np.mean(scores)), scores, zeros)


def tcv(top_venues: list[list[int]], top_times: list[list[int]], counts: SlidingWindowCounts,
        config: CoherenceConfig = CoherenceConfig()) -> CoherenceResult:
    """Temporal coherence value: mean over (pattern, top venue) segments of the
    cosine between the venue's NPMI vector over the pattern's top times and the
    sum of those vectors over all the pattern's top venues."""
    if len(top_venues) != len(top_times):
        raise ValueError("need top venues and top times for every pattern")
    q = counts.window_total

    def blocks():
        for vs, ts in zip(top_venues, top_times):
            if not vs or not ts:
                raise ValueError("every pattern needs non-empty top venues and top times")
            vs, ts = np.asarray(vs), np.asarray(ts)
            yield npmi_matrix(counts.co_vt[np.ix_(vs, ts)], counts.occur_v[vs], counts.occur_t[ts], q,
                              config.epsilon, config.tau)

    return _aggregate(blocks())


def cv(top_venues: list[list[int]], counts: SlidingWindowCounts,
       config: CoherenceConfig = CoherenceConfig()) -> CoherenceResult:
    """Standard CV over categories: one-set segmentation, NPMI context vectors over
    the pattern's own top set, cosine against the set's aggregate vector."""
    q = counts.window_total

    def blocks():
        for vs in top_venues:
            if not vs:
                raise ValueError("every pattern needs non-empty top venues")
            vs = np.asarray(vs)
            yield npmi_matrix(counts.co_vv[np.ix_(vs, vs)], counts.occur_v[vs], counts.occur_v[vs], q,
                              config.epsilon, config.tau)

    return _aggregate(blocks())


def top_lists(dists: tlda.PatternDistributions, config: CoherenceConfig):
    K = dists.phi.shape[0]
    if config.venue_threshold is not None:
        venues = [tlda.top_venues(dists, k, threshold=config.venue_threshold) for k in range(K)]
    else:
        venues = [tlda.top_venues(dists, k, n=config.top_n_venues) for k in range(K)]
    times = [tlda.top_times(dists, k, config.top_n_times) for k in range(K)]
    return venues, times


def model_tcv(model: tlda.TldaModel, counts: SlidingWindowCounts,
              config: CoherenceConfig = CoherenceConfig()) -> CoherenceResult:
    venues, times = top_lists(tlda.distributions(model), config)
    return tcv(venues, times, counts, config)


def model_cv(model: tlda.TldaModel, counts: SlidingWindowCounts,
             config: CoherenceConfig = CoherenceConfig()) -> CoherenceResult:
    venues, _ = top_lists(tlda.distributions(model), config)
    return cv(venues, counts, config)


def chain_seeds(seed: int, chains: int) -> list[int]:
    """Independent, reproducible per-chain seeds derived from one run seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(chains)]


@dataclass
class SelectKResult:
    best_k: int
    rows: list[tuple[int, int, float]]   # (K, chain, TCV)
    mean_tcv: dict[int, float]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "chain", "score"])
            for k, c, s in self.rows:
                w.writerow([k, c, repr(s)])
            for k, s in self.mean_tcv.items():
                w.writerow([k, "mean", repr(s)])


def select_k(corpus: Corpus, k_candidates, hp_template: tlda.TldaHyperparams, chains: int = 1,
             config: CoherenceConfig = CoherenceConfig(),
             counts: SlidingWindowCounts | None = None) -> SelectKResult:
    """Fit every candidate K ``chains`` times and pick the highest mean TCV
    (lowest K on ties).  Priors left at their defaults in the template scale
    with each K."""
    ks = list(k_candidates)
    if not ks:
        raise ValueError("need at least one K candidate")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    counts = counts if counts is not None else build_windows(corpus, config.window_size)
    scale_alpha = hp_template.alpha == 50.0 / hp_template.K
    scale_gamma = hp_template.gamma == 50.0 / hp_template.K
    rows, means = [], {}
    for k in ks:
        scores = []
        for c, s in enumerate(chain_seeds(hp_template.seed, chains)):
            hp = replace(hp_template, K=k, seed=s,
                         alpha=None if scale_alpha else hp_template.alpha,
                         gamma=None if scale_gamma else hp_template.gamma)
            score = model_tcv(tlda.fit(corpus, hp), counts, config).score
            rows.append((k, c, score))
            scores.append(score)
        means[k] = float(np.mean(scores))
        log.info("select_k: K=%d mean TCV %.4f", k, means[k])
    best = max(ks, key=lambda k: (means[k], -k))
    return SelectKResult(best, rows, means)


def venue_similarity(dists: tlda.PatternDistributions) -> np.ndarray:
    """Cosine similarity of categories by their pattern-loading vectors (columns of phi)."""
    cols = dists.phi / dists.phi.sum(axis=0, keepdims=True)
    unit = cols / np.linalg.norm(cols, axis=0, keepdims=True)
    sim = unit.T @ unit
    sim = np.clip((sim + sim.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


def similarity_to_csv(sim: np.ndarray, labels: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["category"] + list(labels))
        for lab, row in zip(labels, sim):
            w.writerow([lab] + [repr(float(x)) for x in row])
