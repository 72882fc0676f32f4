"""Temporal LDA fitted by collapsed Gibbs sampling.

Every check-in ``(u, t, v)`` carries a latent pattern ``z`` whose prior mixes the
user's pattern distribution and the time token's pattern distribution; the
venue category is then drawn from the pattern's category distribution.  With
the count of the event itself removed, the sampler draws

    P(z = k) ∝ (n_uz[u,k] + alpha) (n_tz[t,k] + gamma) (n_zv[k,v] + beta) / (n_z[k] + V beta)

which is the exact full conditional of the collapsed joint in
:func:`log_joint`.  Dropping the time factor gives plain LDA with users as
documents.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .datamodel import Corpus

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TldaHyperparams:
    K: int
    alpha: float | None = None   # default 50 / K
    beta: float = 0.01
    gamma: float | None = None   # default 50 / K
    iterations: int = 100
    burn_in: int = 0
    seed: int = 0
    temporal_enabled: bool = True

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 50.0 / self.K)
        if self.gamma is None:
            object.__setattr__(self, "gamma", 50.0 / self.K)
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("alpha, beta and gamma must be positive")
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ValueError("need iterations >= 1 and 0 <= burn_in < iterations")


@dataclass
class TldaModel:
    n_uz: np.ndarray   # (U, K) int32
    n_tz: np.ndarray   # (T, K) int32
    n_zv: np.ndarray   # (K, V) int32
    n_z: np.ndarray    # (K,) int32
    z_assign: np.ndarray
    hyperparams: TldaHyperparams

    @property
    def K(self) -> int:
        return self.hyperparams.K

    def check_counts(self, corpus: Corpus | None = None) -> None:
        """Raise ``AssertionError`` if the count matrices are inconsistent."""
        K = self.K
        assert self.z_assign.size == 0 or (self.z_assign.min() >= 0 and self.z_assign.max() < K)
        assert np.array_equal(self.n_uz.sum(axis=0), self.n_z)
        assert np.array_equal(self.n_tz.sum(axis=0), self.n_z)
        assert np.array_equal(self.n_zv.sum(axis=1), self.n_z)
        assert int(self.n_z.sum()) == self.z_assign.size
        assert (self.n_uz >= 0).all() and (self.n_tz >= 0).all() and (self.n_zv >= 0).all()
        if corpus is not None:
            assert np.array_equal(self.n_uz.sum(axis=1), np.bincount(corpus.event_user, minlength=corpus.n_users))
            rebuilt = _count_matrices(corpus, self.z_assign, K)
            for a, b in zip(rebuilt, (self.n_uz, self.n_tz, self.n_zv, self.n_z)):
                assert np.array_equal(a, b)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        meta = {"format": "tlda-model", "version": MODEL_FORMAT_VERSION, "hyperparams": asdict(self.hyperparams)}
        (d / "model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        for name in ("n_uz", "n_tz", "n_zv", "n_z", "z_assign"):
            np.save(d / f"{name}.npy", getattr(self, name))

    @classmethod
    def load(cls, directory) -> "TldaModel":
        d = Path(directory)
        meta = json.loads((d / "model.json").read_text())
        if meta.get("format") != "tlda-model" or meta.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"{d}: unsupported model bundle {meta.get('format')} v{meta.get('version')}")
        arrays = {name: np.load(d / f"{name}.npy") for name in ("n_uz", "n_tz", "n_zv", "n_z", "z_assign")}
        return cls(hyperparams=TldaHyperparams(**meta["hyperparams"]), **arrays)


@dataclass
class PatternDistributions:
    theta: np.ndarray  # (U, K) pattern distribution of each user
    psi: np.ndarray    # (T, K) pattern distribution of each time token
    phi: np.ndarray    # (K, V) category distribution of each pattern


def _count_matrices(corpus: Corpus, z: np.ndarray, K: int):
    n_uz = np.zeros((corpus.n_users, K), np.int32)
    n_tz = np.zeros((corpus.n_times, K), np.int32)
    n_zv = np.zeros((K, corpus.n_categories), np.int32)
    np.add.at(n_uz, (corpus.event_user, z), 1)
    np.add.at(n_tz, (corpus.event_time, z), 1)
    np.add.at(n_zv, (z, corpus.event_category), 1)
    n_z = np.bincount(z, minlength=K).astype(np.int32)
    return n_uz, n_tz, n_zv, n_z


class GibbsSampler:
    """One collapsed Gibbs chain.  ``sweep()`` resamples every event once, in
    corpus order, drawing one uniform per event from a PCG64 stream."""

    def __init__(self, corpus: Corpus, hp: TldaHyperparams):
        if corpus.n_events == 0:
            raise ValueError("corpus has no events")
        if hp.K > corpus.n_events:
            raise ValueError(f"K={hp.K} exceeds the number of events ({corpus.n_events})")
        if corpus.n_categories == 1:
            warnings.warn("corpus has a single venue category; patterns will differ only by user and time",
                          RuntimeWarning, stacklevel=2)
        self.corpus = corpus
        self.hp = hp
        self.rng = np.random.Generator(np.random.PCG64(hp.seed))
        self.users = np.ascontiguousarray(corpus.event_user, np.int32)
        self.times = np.ascontiguousarray(corpus.event_time, np.int32)
        self.cats = np.ascontiguousarray(corpus.event_category, np.int32)
        self.z = self.rng.integers(0, hp.K, size=corpus.n_events).astype(np.int32)
        self.n_uz, self.n_tz, self.n_zv, self.n_z = _count_matrices(corpus, self.z, hp.K)
        self.sweeps_done = 0

    def sweep(self) -> None:
        hp = self.hp
        uniforms = self.rng.random(self.z.shape[0])
        kernels.gibbs_sweep(self.users, self.times, self.cats, self.z,
                            self.n_uz, self.n_tz, self.n_zv, self.n_z,
                            float(hp.alpha), float(hp.beta), float(hp.gamma),
                            bool(hp.temporal_enabled), uniforms)
        self.sweeps_done += 1

    def model(self) -> TldaModel:
        return TldaModel(self.n_uz.copy(), self.n_tz.copy(), self.n_zv.copy(),
                         self.n_z.copy(), self.z.copy(), self.hp)


def fit(corpus: Corpus, hp: TldaHyperparams, callback=None) -> TldaModel:
    """Run ``hp.iterations`` sweeps and return the counts of the final sweep.

    ``callback(sampler)`` is called after every post-burn-in sweep.
    """
    sampler = GibbsSampler(corpus, hp)
    for it in range(hp.iterations):
        sampler.sweep()
        if callback is not None and it >= hp.burn_in:
            callback(sampler)
    log.debug("fit K=%d seed=%d: %d sweeps", hp.K, hp.seed, hp.iterations)
    return sampler.model()


def conditional(model: TldaModel, event: int, corpus: Corpus) -> np.ndarray:
    """Normalised sampling distribution over patterns for ``event``, with the
    event's own assignment removed from the counts."""
    hp = model.hyperparams
    u, t, v = corpus.event_user[event], corpus.event_time[event], corpus.event_category[event]
    own = np.zeros(hp.K)
    own[model.z_assign[event]] = 1
    p = (model.n_uz[u] - own + hp.alpha) * (model.n_zv[:, v] - own + hp.beta) / (model.n_z - own + corpus.n_categories * hp.beta)
    if hp.temporal_enabled:
        p = p * (model.n_tz[t] - own + hp.gamma)
    return p / p.sum()


def log_joint(n_uz, n_tz, n_zv, alpha, beta, gamma, temporal=True) -> float:
    """Unnormalised log probability of an assignment under the collapsed model.

    User and time factors are Dirichlet-multinomial terms without their
    k-independent normalisers; the category factor carries its full
    ``Gamma(n_z + V beta)`` denominator.
    """
    from scipy.special import gammaln

    V = n_zv.shape[1]
    lp = gammaln(np.asarray(n_uz) + alpha).sum()
    lp += (gammaln(np.asarray(n_zv) + beta).sum(axis=1) - gammaln(np.asarray(n_zv).sum(axis=1) + V * beta)).sum()
    if temporal:
        lp += gammaln(np.asarray(n_tz) + gamma).sum()
    return float(lp)


def distributions(model: TldaModel) -> PatternDistributions:
    hp = model.hyperparams
    K = hp.K
    theta = (model.n_uz + hp.alpha) / (model.n_uz.sum(axis=1, keepdims=True) + K * hp.alpha)
    psi = (model.n_tz + hp.gamma) / (model.n_tz.sum(axis=1, keepdims=True) + K * hp.gamma)
    V = model.n_zv.shape[1]
    phi = (model.n_zv + hp.beta) / (model.n_z[:, None] + V * hp.beta)
    return PatternDistributions(theta, psi, phi)


def assign_user_pattern(dists: PatternDistributions, u: int) -> int:
    return int(np.argmax(dists.theta[u]))  # argmax returns the lowest index on ties


def assign_all(dists: PatternDistributions) -> np.ndarray:
    return np.argmax(dists.theta, axis=1)


def _ranked(scores: np.ndarray) -> np.ndarray:
    # stable sort on the negated scores: descending, lowest index first on ties
    return np.argsort(-scores, kind="stable")


def top_venues(dists: PatternDistributions, k: int, *, n: int | None = None,
               threshold: float | None = None) -> list[int]:
    """Category indices of pattern ``k`` by descending probability: the top ``n``,
    or every category with probability above ``threshold``."""
    if (n is None) == (threshold is None):
        raise ValueError("give exactly one of n or threshold")
    if not 0 <= k < dists.phi.shape[0]:
        raise IndexError(f"pattern {k} out of range")
    row = dists.phi[k]
    order = _ranked(row)
    if threshold is not None:
        return [int(v) for v in order if row[v] > threshold]
    return [int(v) for v in order[:n]]


def top_times(dists: PatternDistributions, k: int, n: int) -> list[int]:
    col = dists.psi[:, k]
    return [int(t) for t in _ranked(col)[:n]]


def export_tables(model: TldaModel, corpus: Corpus, directory) -> None:
    """Labelled CSVs of theta, psi and phi (rows are users, time tokens, patterns)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dist = distributions(model)
    head = [f"pattern_{k}" for k in range(model.K)]

    def write(name, first, labels, mat, header):
        with open(d / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([first] + header)
            for lab, row in zip(labels, mat):
                w.writerow([lab] + [repr(float(x)) for x in row])

    write("pattern_user.csv", "user", corpus.users, dist.theta, head)
    write("pattern_time.csv", "time_token", corpus.time_labels(), dist.psi, head)
    write("venue_pattern.csv", "pattern", head, dist.phi, list(corpus.categories))
