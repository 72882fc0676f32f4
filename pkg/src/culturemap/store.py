"""On-disk bundles for the ingested corpus and the DSR grid.

A bundle is a directory holding one JSON file (vocabularies, geometry and
settings) and one ``.npy`` file per array, so rewriting the same object gives
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .datamodel import Corpus, HourGranularity
from .dsi import DsrGrid, GridSpec, VenueSupplyProfile

CORPUS_FORMAT_VERSION = 1
GRID_FORMAT_VERSION = 1

ARRAYS = ("event_user", "event_time", "event_category", "event_venue", "event_lat", "event_lon",
          "event_ts", "venue_lat", "venue_lon", "venue_category",
          "side_user", "side_lat", "side_lon", "side_ts")


def save_corpus(corpus: Corpus, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": "corpus",
        "version": CORPUS_FORMAT_VERSION,
        "users": corpus.users,
        "categories": corpus.categories,
        "time_tokens": [int(t) for t in corpus.time_tokens],
        "venues": corpus.venues,
        "tz_offset": int(corpus.tz_offset),
        "granularity": corpus.granularity.spec(),
        "reference": list(corpus.reference),
    }
    (d / "corpus.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    for name in ARRAYS:
        np.save(d / f"{name}.npy", np.ascontiguousarray(getattr(corpus, name)))


def load_corpus(directory) -> Corpus:
    d = Path(directory)
    meta = json.loads((d / "corpus.json").read_text())
    if meta.get("format") != "corpus" or meta.get("version") != CORPUS_FORMAT_VERSION:
        raise ValueError(f"{d}: unsupported corpus bundle {meta.get('format')} v{meta.get('version')}")
    arrays = {name: np.load(d / f"{name}.npy") for name in ARRAYS}
    corpus = Corpus(meta["users"], meta["categories"], meta["time_tokens"], meta["venues"],
                    tz_offset=meta["tz_offset"], granularity=HourGranularity.parse(meta["granularity"]),
                    reference=tuple(meta["reference"]), **arrays)
    corpus.validate()
    return corpus


def save_grid(grid: DsrGrid, venues: list[VenueSupplyProfile], directory) -> None:
    """Grid geometry, the per-pattern layers and the venue supply profiles."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    spec = grid.spec
    meta = {
        "format": "dsr-grid",
        "version": GRID_FORMAT_VERSION,
        "origin": list(spec.origin),
        "cell_size": spec.cell_size,
        "n_cols": spec.n_cols,
        "n_rows": spec.n_rows,
        "patterns": sorted(int(z) for z in grid.dsr),
        "venues": [{"venue": v.venue, "x": v.location[0], "y": v.location[1], "pattern": v.pattern,
                    "sigma": v.sigma, "flagged": v.flagged} for v in venues],
    }
    (d / "grid.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    for z in meta["patterns"]:
        for layer in ("demand", "supply", "dsr"):
            np.save(d / f"{layer}_{z}.npy", getattr(grid, layer)[z])


def load_grid(directory) -> tuple[DsrGrid, list[VenueSupplyProfile]]:
    d = Path(directory)
    meta = json.loads((d / "grid.json").read_text())
    if meta.get("format") != "dsr-grid" or meta.get("version") != GRID_FORMAT_VERSION:
        raise ValueError(f"{d}: unsupported grid bundle {meta.get('format')} v{meta.get('version')}")
    spec = GridSpec(tuple(meta["origin"]), meta["cell_size"], meta["n_cols"], meta["n_rows"])
    grid = DsrGrid(spec)
    for z in meta["patterns"]:
        for layer in ("demand", "supply", "dsr"):
            arr = np.load(d / f"{layer}_{z}.npy")
            if arr.shape != (spec.n_cells,):
                raise ValueError(f"{d}: {layer} layer of pattern {z} does not match the grid")
            getattr(grid, layer)[z] = arr
    venues = [VenueSupplyProfile(v["venue"], (v["x"], v["y"]), v["pattern"], v["sigma"], v["flagged"])
              for v in meta["venues"]]
    return grid, venues
