"""Deterministic synthetic shopping data with planted structure.

``clustered`` plants item clusters (one brand and one leaf category per
cluster) so embedding geometry and less-wrong distances have a known answer.
``zipf`` draws items from a power-law popularity so popularity strata and
bias metrics have one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

SESSION_SPACING_MS = 3_600_000
EVENT_SPACING_MS = 30_000
BASE_TS = 1_561_939_200_000  # 2019-07-01T00:00:00Z
PRICE_RANGE = (10.0, 1000.0)


@dataclass(frozen=True)
class SynSpec:
    preset: str = "clustered"
    n_clusters: int = 5
    items_per_cluster: int = 20
    n_sessions: int = 5000
    session_len_range: tuple[int, int] = (3, 8)
    cross_cluster_noise: float = 0.05
    zipf_exponent: float = 1.1
    n_items: int = 1000
    seed: int = 42

    def __post_init__(self):
        if self.preset not in ("clustered", "zipf"):
            raise ConfigError(f"unknown preset {self.preset!r}")
        for name in ("n_clusters", "items_per_cluster", "n_sessions", "n_items"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        lo, hi = self.session_len_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad session_len_range {self.session_len_range}")
        if not 0.0 <= self.cross_cluster_noise < 1.0:
            raise ConfigError("cross_cluster_noise must be in [0, 1)")
        if self.cross_cluster_noise > 0 and self.n_clusters < 2:
            raise ConfigError("cross-cluster noise needs at least two clusters")
        if self.zipf_exponent <= 0:
            raise ConfigError("zipf_exponent must be positive")
        if self.preset == "clustered" and hi > self.items_per_cluster:
            raise ConfigError(
                f"sessions of up to {hi} distinct items cannot be drawn from "
                f"clusters of {self.items_per_cluster}"
            )

    @property
    def total_items(self) -> int:
        if self.preset == "clustered":
            return self.n_clusters * self.items_per_cluster
        return self.n_items


@dataclass
class SynData:
    interactions: list[dict]
    catalog: list[dict]
    manifest: dict[str, dict]

    def cluster_of(self, item_id: str) -> int:
        return self.manifest[item_id]["cluster"]


def zipf_probabilities(n_items: int, exponent: float) -> np.ndarray:
    """Finite Zipf law: P(rank r) ∝ r^-exponent for r = 1..n_items."""
    w = np.arange(1, n_items + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


def _item_id(i: int) -> str:
    return f"i{i:05d}"


def _catalog(spec: SynSpec, rng: np.random.Generator):
    n = spec.total_items
    if spec.preset == "clustered":
        clusters = np.repeat(np.arange(spec.n_clusters), spec.items_per_cluster)
    else:
        clusters = np.arange(n) % spec.n_clusters
    n_depts = max(1, math.ceil(spec.n_clusters / 2))
    lo, hi = np.log(PRICE_RANGE[0]), np.log(PRICE_RANGE[1])
    prices = np.round(np.exp(rng.uniform(lo, hi, size=n)), 2)
    rows = []
    for i in range(n):
        c = int(clusters[i])
        path = [f"dept{c % n_depts}", f"cat{c}"]
        rec = {
            "item_id": _item_id(i),
            "price": float(prices[i]),
            "brand": f"brand{c}",
            "category_path": ">".join(path),
        }
        rows.append(rec)
    return rows, clusters


def generate_data(spec: SynSpec) -> SynData:
    """Build the synthetic corpus in memory."""
    rng = np.random.default_rng(spec.seed)
    catalog, clusters = _catalog(spec, rng)
    ids = [r["item_id"] for r in catalog]
    manifest = {
        r["item_id"]: {
            "cluster": int(clusters[i]),
            "brand": r["brand"],
            "category_path": r["category_path"],
            "price": r["price"],
        }
        for i, r in enumerate(catalog)
    }
    lo, hi = spec.session_len_range
    probs = zipf_probabilities(spec.n_items, spec.zipf_exponent) if spec.preset == "zipf" else None
    per = spec.items_per_cluster
    interactions = []
    for s in range(spec.n_sessions):
        length = int(rng.integers(lo, hi + 1))
        if spec.preset == "clustered":
            home = int(rng.integers(spec.n_clusters))
            picks = list(home * per + rng.choice(per, size=length, replace=False))
            noisy = rng.random(length) < spec.cross_cluster_noise
            for pos in np.flatnonzero(noisy):
                other = int(rng.integers(spec.n_clusters - 1))
                other += other >= home
                picks[pos] = other * per + int(rng.integers(per))
        else:
            picks = list(rng.choice(spec.n_items, size=length, p=probs))
        start = BASE_TS + s * SESSION_SPACING_MS
        for j, item in enumerate(picks):
            interactions.append(
                {
                    "session_id": f"s{s:06d}",
                    "item_id": ids[int(item)],
                    "timestamp": start + j * EVENT_SPACING_MS,
                    "event_type": "view",
                }
            )
    return SynData(interactions, catalog, manifest)


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def generate(spec: SynSpec, out_dir) -> dict[str, Path]:
    """Write ``interactions.jsonl``, ``catalog.jsonl`` and ``manifest.json``."""
    data = generate_data(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "interactions": out / "interactions.jsonl",
        "catalog": out / "catalog.jsonl",
        "manifest": out / "manifest.json",
    }
    _write_jsonl(paths["interactions"], data.interactions)
    _write_jsonl(paths["catalog"], data.catalog)
    with open(paths["manifest"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data.manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return paths
