"""Command line entry point: one subcommand per pipeline stage.

Every stage reads its upstream artifacts from the output directory, writes its
own subdirectory atomically and records the settings it used in ``stage.json``.
Settings come from built-in defaults, then an optional flat ``key = value``
config file, then command line flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock, Timeout

from . import coherence, dsi, ingest, pipeline, poptics, store, synthgen, tlda, validate
from .datamodel import HourGranularity

log = logging.getLogger("culturemap")

STAGE_FORMAT_VERSION = 1
STAGES = ("synth", "ingest", "fit", "select-k", "profiles", "dsi", "validate", "report")
UPSTREAM = {
    "synth": (),
    "ingest": (),
    "fit": ("ingest",),
    "select-k": ("ingest",),
    "profiles": ("ingest", "fit"),
    "dsi": ("ingest", "fit", "profiles"),
    "validate": ("ingest", "fit", "profiles", "dsi"),
    "report": ("ingest", "fit", "profiles", "dsi", "validate"),
}
EXPORT_SUFFIXES = (".csv", ".geojson", ".txt")


class CliError(Exception):
    exit_code = 1


class UsageError(CliError):
    exit_code = 1


class DataError(CliError):
    exit_code = 2


class InvariantError(CliError):
    exit_code = 3


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_optional_float(text: str) -> float | None:
    t = str(text).strip().lower()
    return None if t in ("", "auto", "none") else float(t)


def parse_tz_offset(text: str) -> int:
    """``+08:00``, ``-0530`` or a number of hours, to seconds east of UTC."""
    t = str(text).strip()
    if t and t[0] in "+-" and (":" in t or (len(t) == 5 and t[1:].isdigit())):
        sign = -1 if t[0] == "-" else 1
        hh, mm = (t[1:].split(":") if ":" in t else (t[1:3], t[3:]))
        seconds = int(hh) * 3600 + int(mm) * 60
        if int(mm) >= 60:
            raise ValueError(f"bad minutes in UTC offset {text!r}")
    else:
        sign, seconds = 1, round(float(t) * 3600)
    seconds *= sign
    if abs(seconds) > 14 * 3600:
        raise ValueError(f"UTC offset {text!r} outside +-14 h")
    return seconds


def parse_k_candidates(text: str) -> list[int]:
    """``3..9`` or ``3,5,7``."""
    t = str(text).strip()
    if ".." in t:
        lo, hi = (int(p) for p in t.split(".."))
        ks = list(range(lo, hi + 1))
    else:
        ks = [int(p) for p in t.split(",") if p.strip()]
    if not ks:
        raise ValueError("no K candidates")
    return ks


@dataclass(frozen=True)
class Option:
    key: str
    parse: object
    default: str
    help: str


OPTIONS = [
    Option("out", str, "culturemap-out", "output directory owned by this run"),
    Option("seed", int, "0", "run seed; every stochastic stage derives its streams from it"),
    Option("input", str, "", "check-in CSV (default: the synth stage output, if present)"),
    Option("categories", str, "", "cultural categories: a file with one id per line or a comma list; empty keeps all"),
    Option("min_checkins", int, "20", "minimum cultural check-ins for a user to be kept"),
    Option("tz_offset", parse_tz_offset, "+08:00", "UTC offset of local time, e.g. +08:00 or 8"),
    Option("ref_lat", float, "39.9042", "latitude of the projection origin"),
    Option("ref_lon", float, "116.4074", "longitude of the projection origin"),
    Option("hour_granularity", HourGranularity.parse, "24", "'24', 'five' or comma-separated slot start hours"),
    Option("k", int, "6", "number of patterns for fit"),
    Option("k_candidates", parse_k_candidates, "3..9", "K values tried by select-k"),
    Option("model", str, "tlda", "'tlda' or 'lda' (no time factor)"),
    Option("iterations", int, "100", "Gibbs sweeps per chain"),
    Option("burn_in", int, "0", "leading sweeps discarded"),
    Option("alpha", parse_optional_float, "auto", "user prior; auto = 50/K"),
    Option("beta", float, "0.01", "category prior"),
    Option("gamma", parse_optional_float, "auto", "time prior; auto = 50/K"),
    Option("chains", int, "1", "independent chains; fit keeps the highest-TCV chain"),
    Option("epsilon", float, "1e-12", "NPMI smoothing"),
    Option("tau", float, "1", "NPMI exponent"),
    Option("top_venues", int, "10", "top categories per pattern in coherence scores"),
    Option("top_times", int, "10", "top time tokens per pattern in coherence scores"),
    Option("venue_threshold", parse_optional_float, "none", "use categories above this probability instead of a top-n"),
    Option("window_size", int, "10", "sliding window length over each user's check-ins"),
    Option("eta", float, "0.1", "core-distance neighbour rank as a fraction of a user's locations"),
    Option("min_radius", float, "100", "floor of both activity radii, metres"),
    Option("reachability", parse_bool, "false", "also export every user's reachability plot"),
    Option("cell_size", float, "400", "grid cell edge, metres"),
    Option("sigma_floor", float, "100", "floor of a venue's service range, metres"),
    Option("supply_eps", float, "1e-12", "supply below which DSR is undefined"),
    Option("per_user", parse_bool, "false", "correlate per user instead of per cell"),
    Option("synth_k", int, "4", "planted patterns in synth"),
    Option("synth_users", int, "500", "users in synth"),
    Option("synth_checkins", int, "40", "cultural check-ins per synthetic user"),
    Option("synth_categories", int, "40", "cultural categories in synth"),
    Option("synth_mixing", float, "0.05", "mass of a synthetic user's mixture off their pattern"),
    Option("synth_venue_spread", parse_optional_float, "none", "Gaussian spread of venues about the centre; none = uniform"),
]
OPTION_BY_KEY = {o.key: o for o in OPTIONS}

# settings each stage reads, beyond those of its upstream stages
STAGE_KEYS = {
    "synth": ("seed", "synth_k", "synth_users", "synth_checkins", "synth_categories", "synth_mixing",
              "synth_venue_spread", "tz_offset", "ref_lat", "ref_lon"),
    "ingest": ("min_checkins", "tz_offset", "ref_lat", "ref_lon", "hour_granularity"),
    "fit": ("seed", "k", "model", "iterations", "burn_in", "alpha", "beta", "gamma", "chains", "epsilon", "tau",
            "top_venues", "top_times", "venue_threshold", "window_size"),
    "select-k": ("seed", "k_candidates", "model", "iterations", "burn_in", "alpha", "beta", "gamma", "chains",
                 "epsilon", "tau", "top_venues", "top_times", "venue_threshold", "window_size"),
    "profiles": ("eta", "min_radius", "reachability"),
    "dsi": ("cell_size", "sigma_floor", "supply_eps"),
    "validate": ("per_user",),
    "report": ("seed",),
}


def read_config_file(path) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTION_BY_KEY:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value
    return values


class RunConfig:
    """Resolved settings: raw text per key plus the parsed value."""

    def __init__(self, raw: dict[str, str]):
        self.raw = {o.key: str(raw.get(o.key, o.default)) for o in OPTIONS}
        self.values = {}
        for o in OPTIONS:
            try:
                self.values[o.key] = o.parse(self.raw[o.key])
            except (ValueError, TypeError) as exc:
                raise UsageError(f"bad value for {o.key}: {self.raw[o.key]!r} ({exc})") from None
        if self.values["model"] not in ("tlda", "lda"):
            raise UsageError("model must be 'tlda' or 'lda'")
        try:
            self.ingest_config()
            self.hyperparams(self.values["k"])
            for k in self.values["k_candidates"]:
                self.hyperparams(k)
            self.coherence_config()
            self.poptics_config()
            if not (self.values["cell_size"] > 0 and self.values["sigma_floor"] > 0 and self.values["supply_eps"] >= 0):
                raise ValueError("cell_size and sigma_floor must be positive, supply_eps non-negative")
            if self.values["chains"] < 1:
                raise ValueError("chains must be >= 1")
            self.synth_spec()
        except ValueError as exc:
            raise UsageError(f"invalid configuration: {exc}") from None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    def canonical(self, keys=None) -> dict[str, str]:
        keys = [o.key for o in OPTIONS if o.key not in ("out", "input")] if keys is None else keys
        return {k: self.raw[k] for k in sorted(keys)}

    def config_hash(self) -> str:
        text = "".join(f"{k}={v}\n" for k, v in self.canonical().items())
        return hashlib.sha256(text.encode()).hexdigest()

    def whitelist(self, text: str | None = None) -> frozenset[str] | None:
        text = (self.values["categories"] if text is None else text).strip()
        if not text:
            return None
        p = Path(text)
        if p.is_file():
            ids = [ln.strip() for ln in p.read_text(encoding="utf-8").splitlines()]
        elif "/" in text or os.sep in text:
            raise DataError(f"categories file not found: {text}")
        else:
            ids = text.split(",")
        return frozenset(i.strip() for i in ids if i.strip())

    def ingest_config(self, whitelist: frozenset[str] | None = None) -> ingest.IngestConfig:
        v = self.values
        if not (-90 <= v["ref_lat"] <= 90 and -180 <= v["ref_lon"] <= 180):
            raise ValueError("reference point outside the lat/lon range")
        return ingest.IngestConfig(v["min_checkins"], whitelist, v["tz_offset"], v["hour_granularity"],
                                   (v["ref_lat"], v["ref_lon"]))

    def hyperparams(self, k: int) -> tlda.TldaHyperparams:
        v = self.values
        return tlda.TldaHyperparams(k, v["alpha"], v["beta"], v["gamma"], v["iterations"], v["burn_in"],
                                    v["seed"], v["model"] == "tlda")

    def coherence_config(self) -> coherence.CoherenceConfig:
        v = self.values
        return coherence.CoherenceConfig(v["epsilon"], v["tau"], v["top_venues"], v["top_times"],
                                         v["venue_threshold"], v["window_size"])

    def poptics_config(self) -> poptics.PopticsConfig:
        return poptics.PopticsConfig(eta=self.values["eta"], min_radius=self.values["min_radius"])

    def synth_spec(self) -> synthgen.SynthSpec:
        v = self.values
        n = v["synth_checkins"]
        return synthgen.SynthSpec(k_true=v["synth_k"], n_users=v["synth_users"], checkins_per_user=(n, n),
                                  n_categories=v["synth_categories"], user_mixing=v["synth_mixing"],
                                  venue_spread_m=v["synth_venue_spread"], tz_offset=v["tz_offset"],
                                  reference=(v["ref_lat"], v["ref_lon"]), seed=v["seed"])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def stage_dir(cfg: RunConfig, stage: str) -> Path:
    return cfg.out / stage


def require(cfg: RunConfig, stage: str) -> Path:
    d = stage_dir(cfg, stage)
    if not (d / "stage.json").is_file():
        raise UsageError(f"missing artifacts of stage '{stage}' in {cfg.out}; run `culturemap {stage}` first")
    return d


def stage_record(cfg: RunConfig, stage: str, extra: dict | None = None) -> dict:
    upstream = {s: sha256_file(require(cfg, s) / "stage.json") for s in UPSTREAM[stage]}
    rec = {"stage": stage, "version": STAGE_FORMAT_VERSION, "settings": cfg.canonical(STAGE_KEYS[stage]),
           "upstream": upstream}
    if extra:
        rec.update(extra)
    return rec


def up_to_date(cfg: RunConfig, stage: str, record: dict) -> bool:
    f = stage_dir(cfg, stage) / "stage.json"
    if not f.is_file():
        return False
    try:
        return json.loads(f.read_text()) == record
    except ValueError:
        return False


def publish(cfg: RunConfig, stage: str, build, record: dict) -> None:
    """Run ``build(tmp_dir)`` and move the result into place with the stage record."""
    final = stage_dir(cfg, stage)
    tmp = cfg.out / f".{stage}.tmp"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    try:
        build(tmp)
        (tmp / "stage.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def record_timing(cfg: RunConfig, stage: str, seconds: float) -> None:
    # wall-clock times live outside every stage directory so artifacts stay byte-identical
    path = cfg.out / "timings.json"
    try:
        timings = json.loads(path.read_text())
    except (OSError, ValueError):
        timings = {}
    timings[stage] = round(seconds, 3)
    path.write_text(json.dumps(timings, indent=1, sort_keys=True) + "\n")


def _load_corpus(cfg):
    try:
        return store.load_corpus(require(cfg, "ingest") / "corpus")
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"unreadable corpus artifact: {exc}") from None


def _load_model(cfg, corpus):
    try:
        model = tlda.TldaModel.load(require(cfg, "fit") / "model")
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"unreadable model artifact: {exc}") from None
    try:
        model.check_counts(corpus)
    except AssertionError:
        raise InvariantError("model counts are inconsistent with the corpus") from None
    return model


def _load_profiles(cfg, corpus):
    try:
        return poptics.profiles_from_csv(require(cfg, "profiles") / "profiles.csv", corpus.users)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"unreadable profiles artifact: {exc}") from None


# stages

def run_synth(cfg: RunConfig) -> None:
    record = stage_record(cfg, "synth")
    if up_to_date(cfg, "synth", record):
        log.info("synth: up to date")
        return
    syn = synthgen.generate(cfg.synth_spec())
    publish(cfg, "synth", lambda d: synthgen.write(syn, d), record)
    log.info("synth: %d check-ins, %d users", len(syn.checkins), len(syn.user_ids))


def _input_paths(cfg: RunConfig) -> tuple[Path, str]:
    synth = stage_dir(cfg, "synth")
    path = cfg["input"] or (str(synth / "checkins.csv") if (synth / "stage.json").is_file() else "")
    if not path:
        raise UsageError("ingest needs --input (or a synth stage in the output directory)")
    cats = cfg["categories"]
    if not cats and not cfg["input"]:
        cats = str(synth / "cultural_categories.txt")
    if not Path(path).is_file():
        raise DataError(f"input file not found: {path}")
    return Path(path), cats


def run_ingest(cfg: RunConfig) -> None:
    path, cats = _input_paths(cfg)
    whitelist = cfg.whitelist(cats)
    digest = hashlib.sha256("\n".join(sorted(whitelist)).encode()).hexdigest() if whitelist else ""
    # contents, not paths, so the record does not depend on where files live
    record = stage_record(cfg, "ingest", {"input_sha256": sha256_file(path), "categories_sha256": digest})
    if up_to_date(cfg, "ingest", record):
        log.info("ingest: up to date")
        return
    try:
        corpus, report = ingest.corpus_from_file(path, cfg.ingest_config(whitelist))
    except (ValueError, OSError, UnicodeDecodeError) as exc:
        raise DataError(f"ingest: {exc}") from None

    def build(d):
        store.save_corpus(corpus, d / "corpus")
        report.write(d / "rejections.txt")
        ingest.calendar_heatmap(corpus).to_csv(d / "heatmap.csv")

    publish(cfg, "ingest", build, record)
    log.info("ingest: %d users, %d cultural check-ins, %d categories, %d time tokens",
             corpus.n_users, corpus.n_events, corpus.n_categories, corpus.n_times)


def _write_top_lists(model, corpus, config, d: Path) -> None:
    dists = tlda.distributions(model)
    venues, times = coherence.top_lists(dists, config)
    labels = corpus.time_labels()
    with open(d / "top_categories.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "rank", "category", "probability"])
        for k, vs in enumerate(venues):
            for r, v in enumerate(vs, start=1):
                w.writerow([k, r, corpus.categories[v], repr(float(dists.phi[k, v]))])
    with open(d / "top_times.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern", "rank", "time_token", "probability"])
        for k, ts in enumerate(times):
            for r, t in enumerate(ts, start=1):
                w.writerow([k, r, labels[t], repr(float(dists.psi[t, k]))])


def run_fit(cfg: RunConfig) -> None:
    record = stage_record(cfg, "fit")
    if up_to_date(cfg, "fit", record):
        log.info("fit: up to date")
        return
    corpus = _load_corpus(cfg)
    config = cfg.coherence_config()
    counts = coherence.build_windows(corpus, config.window_size)
    hp = cfg.hyperparams(cfg["k"])
    result = pipeline.fit_best_chain(corpus, hp, cfg["chains"], config, counts)
    model = result.model
    try:
        model.check_counts(corpus)
    except AssertionError:
        raise InvariantError("fitted counts do not reconcile with the corpus") from None
    cv_score = coherence.model_cv(model, counts, config).score
    seeds = coherence.chain_seeds(hp.seed, cfg["chains"])

    def build(d):
        model.save(d / "model")
        tlda.export_tables(model, corpus, d)
        _write_top_lists(model, corpus, config, d)
        coherence.similarity_to_csv(coherence.venue_similarity(tlda.distributions(model)), corpus.categories,
                                    d / "category_similarity.csv")
        with open(d / "chains.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["chain", "seed", "tcv", "kept"])
            for c, (s, score) in enumerate(zip(seeds, result.scores)):
                w.writerow([c, s, repr(score), int(c == result.chain)])
        with open(d / "coherence.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["measure", "score"])
            w.writerow(["tcv", repr(result.tcv)])
            w.writerow(["cv", repr(cv_score)])

    publish(cfg, "fit", build, record)
    log.info("fit: K=%d, kept chain %d with TCV %.4f", model.K, result.chain, result.tcv)


def run_select_k(cfg: RunConfig) -> None:
    record = stage_record(cfg, "select-k")
    if up_to_date(cfg, "select-k", record):
        log.info("select-k: up to date")
        return
    corpus = _load_corpus(cfg)
    ks = cfg["k_candidates"]
    res = coherence.select_k(corpus, ks, cfg.hyperparams(ks[0]), cfg["chains"], cfg.coherence_config())

    def build(d):
        res.to_csv(d / "select_k.csv")
        (d / "best_k.txt").write_text(f"{res.best_k}\n")

    publish(cfg, "select-k", build, record)
    log.info("select-k: best K = %d", res.best_k)


def run_profiles(cfg: RunConfig) -> None:
    record = stage_record(cfg, "profiles")
    if up_to_date(cfg, "profiles", record):
        log.info("profiles: up to date")
        return
    corpus = _load_corpus(cfg)
    model = _load_model(cfg, corpus)
    reach = {} if cfg["reachability"] else None
    profiles = pipeline.build_profiles(corpus, model, cfg.poptics_config(), reach)

    def build(d):
        poptics.profiles_to_csv(profiles, corpus.users, d / "profiles.csv")
        if reach is not None:
            with open(d / "reachability.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["user", "position", "index", "reach"])
                for u in sorted(reach):
                    r = reach[u]
                    for i, (idx, rd) in enumerate(zip(r.order.tolist(), r.reach.tolist())):
                        w.writerow([corpus.users[u], i, idx, repr(rd)])

    publish(cfg, "profiles", build, record)
    log.info("profiles: %d users, %d flagged", len(profiles), sum(p.flagged for p in profiles))


def run_dsi(cfg: RunConfig) -> None:
    record = stage_record(cfg, "dsi")
    if up_to_date(cfg, "dsi", record):
        log.info("dsi: up to date")
        return
    corpus = _load_corpus(cfg)
    model = _load_model(cfg, corpus)
    profiles = _load_profiles(cfg, corpus)
    grid, venues = pipeline.build_dsr(corpus, model, profiles, cfg["cell_size"], cfg["sigma_floor"],
                                      cfg["supply_eps"])

    def build(d):
        store.save_grid(grid, venues, d / "grid")
        dsi.layers_to_csv(grid, d / "layers.csv")
        dsi.priority_to_csv(grid, d / "priority.csv")
        dsi.to_geojson(grid, corpus.reference, d / "dsr.geojson")
        with open(d / "venues.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["venue", "pattern", "x", "y", "sigma", "flagged"])
            for v in venues:
                w.writerow([corpus.venues[v.venue], v.pattern, repr(v.location[0]), repr(v.location[1]),
                            repr(v.sigma), int(v.flagged)])

    publish(cfg, "dsi", build, record)
    log.info("dsi: %d x %d grid, %d venues", grid.spec.n_cols, grid.spec.n_rows, len(venues))


def run_validate(cfg: RunConfig) -> None:
    record = stage_record(cfg, "validate")
    if up_to_date(cfg, "validate", record):
        log.info("validate: up to date")
        return
    corpus = _load_corpus(cfg)
    profiles = _load_profiles(cfg, corpus)
    try:
        grid, venues = store.load_grid(require(cfg, "dsi") / "grid")
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"unreadable grid artifact: {exc}") from None
    rows, records, omitted = pipeline.correlations(corpus, profiles, venues, grid, cfg["per_user"])

    def build(d):
        validate.correlations_to_csv(rows, d / "correlations.csv")
        with open(d / "travel.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "pattern", "mean_travel"])
            for r in records:
                w.writerow([corpus.users[r.user], r.pattern, repr(r.mean_travel)])

    publish(cfg, "validate", build, record)
    for c in rows:
        log.info("validate: pattern %d r=%s n=%d %s", c.pattern, "nan" if math.isnan(c.r) else f"{c.r:.3f}",
                 c.n, c.reason)


def run_report(cfg: RunConfig) -> None:
    for s in UPSTREAM["report"]:
        require(cfg, s)
    stages = [s for s in STAGES if s != "report" and (stage_dir(cfg, s) / "stage.json").is_file()]
    artifacts, exports = {}, []
    for s in stages:
        for f in sorted(p for p in stage_dir(cfg, s).rglob("*") if p.is_file()):
            rel = f.relative_to(cfg.out).as_posix()
            artifacts[rel] = sha256_file(f)
            if s != "synth" and f.suffix in EXPORT_SUFFIXES:
                exports.append((f, rel))
    manifest = {
        "format": "run-manifest",
        "version": STAGE_FORMAT_VERSION,
        "seed": cfg["seed"],
        "config_hash": cfg.config_hash(),
        "config": cfg.canonical(),
        "stages": stages,
        "artifacts": artifacts,
        "timings": "../timings.json",
    }

    def build(d):
        for f, rel in exports:
            target = d / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(f, target)
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    publish(cfg, "report", build, stage_record(cfg, "report"))
    log.info("report: %d exports from %d stages", len(exports), len(stages))


RUNNERS = {
    "synth": run_synth,
    "ingest": run_ingest,
    "fit": run_fit,
    "select-k": run_select_k,
    "profiles": run_profiles,
    "dsi": run_dsi,
    "validate": run_validate,
    "report": run_report,
}

HELP = {
    "synth": "generate a synthetic check-in corpus with ground truth",
    "ingest": "parse check-ins, keep cultural fans, build the corpus",
    "fit": "fit the pattern model and export its tables",
    "select-k": "score every candidate K by temporal coherence",
    "profiles": "locate each user's activity centre and radii",
    "dsi": "demand, supply and DSR layers on the city grid",
    "validate": "correlate DSR with travel distance per pattern",
    "report": "bundle exports with a run manifest",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value settings file")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS, help="more logging")
    for o in OPTIONS:
        p.add_argument("--" + o.key.replace("_", "-"), dest=o.key, default=argparse.SUPPRESS,
                       metavar=o.key.upper(), help=f"{o.help} (default {o.default or 'empty'})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="culturemap", description=__doc__.splitlines()[0])
    _add_options(parser)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name in STAGES:
        _add_options(sub.add_parser(name, help=HELP[name], description=HELP[name]))
    return parser


def resolve(argv) -> tuple[str, RunConfig, int]:
    ns = vars(build_parser().parse_args(argv))
    raw = read_config_file(ns["config"]) if "config" in ns else {}
    raw.update({k: str(v) for k, v in ns.items() if k in OPTION_BY_KEY})
    return ns["command"], RunConfig(raw), ns.get("verbose", 0)


def main(argv=None) -> int:
    try:
        command, cfg, verbose = resolve(sys.argv[1:] if argv is None else argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        with FileLock(str(cfg.out / ".lock"), timeout=0):
            start = time.perf_counter()
            RUNNERS[command](cfg)
            record_timing(cfg, command, time.perf_counter() - start)
    except Timeout:
        print(f"error: {cfg.out} is locked by another culturemap process", file=sys.stderr)
        return 1
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except AssertionError as exc:
        print(f"error: internal invariant violated: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
