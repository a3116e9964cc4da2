"""Behavioral tests: less-wrong distances, taxonomy path length, popularity
strata, data slices and asymmetry checks.

Every case-based test reports ``n_cases + n_skipped == len(pairs)`` with the
skips broken down by reason.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .dataset import Catalog, TestCase
from .embedding import EmbeddingSpace, cosine_distance
from .metrics import Pairs, hit_rank
from .models import RecModel, checked_predict

SCOPES = ("misses_only", "all")
HIST_RANGE = (0.0, 2.0)


def _mean(values) -> float | None:
    return math.fsum(values) / len(values) if values else None


@dataclass(frozen=True)
class DistanceReport:
    name: str
    mean_query_to_label: float | None
    mean_query_to_pred: float | None
    histogram_label: list
    histogram_pred: list
    n_cases: int
    n_skipped: int
    skip_reasons: dict = field(default_factory=dict)
    # per-case values, kept for analysis but left out of serialized reports
    d_label: tuple = field(default=(), repr=False, compare=False)
    d_pred: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        del out["d_label"], out["d_pred"]
        return out


def histogram(values: Sequence[float], bins: int) -> list[list]:
    """Equal-width histogram over the full cosine-distance range [0, 2]."""
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=HIST_RANGE)
    return [[float(edges[i]), float(edges[i + 1]), int(counts[i])] for i in range(bins)]


def _distance_report(name, pairs, space, to_token, scope, bins, miss_rank) -> DistanceReport:
    if len(space) == 0:
        raise ValueError("embedding space is empty")
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}")
    if bins < 1 or miss_rank < 1:
        raise ValueError("bins and miss_rank must be positive")
    skips: Counter[str] = Counter()
    d_label, d_pred = [], []
    for case, pred in pairs:
        if not pred:
            skips["empty_prediction"] += 1
            continue
        if scope == "misses_only" and hit_rank(case, pred, miss_rank) is not None:
            skips["hit"] += 1
            continue
        qtokens = [t for t in (to_token(i) for i in case.query) if t is not None]
        qvec = space.mean_vector(qtokens)
        if qvec is None or not np.any(qvec):
            skips["query_missing"] += 1
            continue
        label = to_token(case.target)
        if label is None or label not in space:
            skips["label_missing"] += 1
            continue
        top = to_token(pred.items[0])
        if top is None or top not in space:
            skips["prediction_missing"] += 1
            continue
        d_label.append(cosine_distance(qvec, space[label]))
        d_pred.append(cosine_distance(qvec, space[top]))
    return DistanceReport(
        name=name,
        mean_query_to_label=_mean(d_label),
        mean_query_to_pred=_mean(d_pred),
        histogram_label=histogram(d_label, bins),
        histogram_pred=histogram(d_pred, bins),
        n_cases=len(d_label),
        n_skipped=sum(skips.values()),
        skip_reasons=dict(sorted(skips.items())),
        d_label=tuple(d_label),
        d_pred=tuple(d_pred),
    )


def less_wrong_distances(
    pairs: Pairs,
    space: EmbeddingSpace,
    scope: str = "misses_only",
    bins: int = 20,
    *,
    miss_rank: int = 1,
    name: str = "cos_distance_misses",
) -> DistanceReport:
    """Cosine distance from the query to the label and to the top prediction.

    The query vector is the mean of its in-vocabulary items. With
    ``scope="misses_only"`` cases whose label is within the top ``miss_rank``
    predictions are skipped (reason ``hit``).
    """
    return _distance_report(name, pairs, space, lambda item: item, scope, bins, miss_rank)


def brand_distance(
    pairs: Pairs,
    brand_space: EmbeddingSpace,
    catalog: Catalog,
    scope: str = "misses_only",
    bins: int = 20,
    *,
    miss_rank: int = 1,
    name: str = "cos_distance_brand",
) -> DistanceReport:
    """As :func:`less_wrong_distances`, after mapping every item to its brand."""
    return _distance_report(name, pairs, brand_space, catalog.brand, scope, bins, miss_rank)


@dataclass(frozen=True)
class PathLengthResult:
    name: str
    mean: float | None
    n_cases: int
    n_skipped: int
    skip_reasons: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def taxonomy_path_length(
    pairs: Pairs, catalog: Catalog, anchor: str = "query_last", *, name: str = "path_length_category"
) -> PathLengthResult:
    """Mean tree distance between the anchor's leaf category and the top
    prediction's. The anchor is the last query item or the label."""
    if anchor not in ("query_last", "label"):
        raise ValueError("anchor must be 'query_last' or 'label'")
    tax = catalog.taxonomy
    skips: Counter[str] = Counter()
    lengths = []
    for case, pred in pairs:
        if not pred:
            skips["empty_prediction"] += 1
            continue
        a = catalog.category_node(case.query[-1] if anchor == "query_last" else case.target)
        if a is None:
            skips["anchor_missing"] += 1
            continue
        b = catalog.category_node(pred.items[0])
        if b is None:
            skips["prediction_missing"] += 1
            continue
        lengths.append(tax.distance(a, b))
    return PathLengthResult(
        name,
        sum(lengths) / len(lengths) if lengths else None,
        len(lengths),
        sum(skips.values()),
        dict(sorted(skips.items())),
    )


@dataclass(frozen=True)
class Bucket:
    bucket_low_count: int
    bucket_high_count: int
    hr_at_k: float
    n_cases: int


@dataclass(frozen=True)
class StrataReport:
    name: str
    k: int
    scheme: str
    requested_buckets: int
    buckets: list[Bucket]
    n_skipped: int

    @property
    def n_cases(self) -> int:
        return sum(b.n_cases for b in self.buckets)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["actual_buckets"] = len(self.buckets)
        out["n_cases"] = self.n_cases
        return out


def quantile_bucket_ids(counts: Sequence[int], n_buckets: int) -> list[int]:
    """Equal-count bucket index per value, never splitting equal values.

    A run of equal values goes to the bucket its first position falls in
    (``floor(start * n_buckets / n)``); empty buckets are then squeezed out.
    """
    n = len(counts)
    order = sorted(range(n), key=lambda i: counts[i])
    raw = [0] * n
    start = 0
    while start < n:
        end = start
        while end < n and counts[order[end]] == counts[order[start]]:
            end += 1
        b = start * n_buckets // n
        for j in range(start, end):
            raw[order[j]] = b
        start = end
    dense = {b: i for i, b in enumerate(sorted(set(raw)))}
    return [dense[b] for b in raw]


def popularity_strata(
    pairs: Pairs,
    popularity: Mapping[str, int],
    k: int,
    n_buckets: int = 10,
    scheme: str = "quantile",
    *,
    name: str = "popularity_strata",
) -> StrataReport:
    """HR@k per bucket of ground-truth training popularity.

    ``quantile`` makes equal-count buckets (ties kept together, so fewer
    buckets than requested may come back); ``log`` buckets by
    ``floor(log2(count + 1))``.
    """
    if scheme not in ("quantile", "log"):
        raise ValueError("scheme must be 'quantile' or 'log'")
    if n_buckets < 1:
        raise ValueError("n_buckets must be positive")
    live = [(c, p) for c, p in pairs if p]
    skipped = len(pairs) - len(live)
    counts = [popularity.get(c.target, 0) for c, _ in live]
    hits = [hit_rank(c, p, k) is not None for c, p in live]
    if scheme == "quantile":
        ids = quantile_bucket_ids(counts, n_buckets) if live else []
    else:
        ids = [(c + 1).bit_length() - 1 for c in counts]
    groups: dict[int, list[int]] = {}
    for i, b in enumerate(ids):
        groups.setdefault(b, []).append(i)
    buckets = []
    for b in sorted(groups):
        members = groups[b]
        cs = [counts[i] for i in members]
        buckets.append(
            Bucket(min(cs), max(cs), sum(hits[i] for i in members) / len(members), len(members))
        )
    return StrataReport(name, k, scheme, n_buckets, buckets, skipped)


@dataclass(frozen=True)
class SliceStats:
    hr_at_k: float
    mrr_at_k: float
    n_cases: int


@dataclass(frozen=True)
class SliceReport:
    name: str
    k: int
    slices: dict[str, SliceStats]
    n_unsliceable: int
    n_skipped: int

    @property
    def n_cases(self) -> int:
        return sum(s.n_cases for s in self.slices.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_cases"] = self.n_cases
        return out


Partition = Callable[[TestCase], Hashable | None]


def slice_metrics(pairs: Pairs, k: int, partition: Partition, *, name: str = "slice") -> SliceReport:
    """HR@k and MRR@k per partition key; ``None`` keys are unsliceable.

    Skipped (empty) predictions are left out before partitioning.
    """
    hits: dict[str, list[int]] = {}
    recip: dict[str, float] = {}
    unsliceable = skipped = 0
    for case, pred in pairs:
        if not pred:
            skipped += 1
            continue
        key = partition(case)
        if key is None:
            unsliceable += 1
            continue
        key = str(key)
        rank = hit_rank(case, pred, k)
        hits.setdefault(key, []).append(rank is not None)
        recip[key] = recip.get(key, 0.0) + (1.0 / rank if rank else 0.0)
    slices = {
        key: SliceStats(sum(h) / len(h), recip[key] / len(h), len(h)) for key, h in sorted(hits.items())
    }
    return SliceReport(name, k, slices, unsliceable, skipped)


def brand_partition(catalog: Catalog) -> Partition:
    """Brand of the last query item."""
    return lambda case: catalog.brand(case.query[-1])


def category_partition(catalog: Catalog) -> Partition:
    """Leaf category of the last query item."""

    def key(case):
        meta = catalog.get(case.query[-1])
        return meta.category_leaf if meta else None

    return key


def cold_start_partition(popularity: Mapping[str, int]) -> Partition:
    """``cold`` if the target never occurs in training, else ``warm``."""
    return lambda case: "warm" if popularity.get(case.target, 0) > 0 else "cold"


@dataclass(frozen=True)
class AsymmetryResult:
    name: str
    score: float | None
    n_pairs: int
    n_reciprocal: int

    def to_dict(self) -> dict:
        return asdict(self)


def asymmetry_directional(
    model: RecModel, probe_items: Sequence[str], k: int, *, name: str = "asymmetry_directional"
) -> AsymmetryResult:
    """Fraction of (a, b in top-k(a)) pairs where a is also in top-k(b).

    Near 1 means symmetric, similar-items behaviour; low values mean the
    directional behaviour expected of complementary recommendations.
    """
    if not probe_items:
        raise ValueError("probe_items must be non-empty")
    probes = list(dict.fromkeys(probe_items))
    forward = checked_predict(model, [[a] for a in probes], k)
    targets = list(dict.fromkeys(b for p in forward for b in p.items))
    backward = dict(zip(targets, checked_predict(model, [[b] for b in targets], k))) if targets else {}
    n_pairs = reciprocal = 0
    for a, pred in zip(probes, forward):
        for b in pred.items:
            n_pairs += 1
            reciprocal += a in backward[b].items
    return AsymmetryResult(name, reciprocal / n_pairs if n_pairs else None, n_pairs, reciprocal)


@dataclass(frozen=True)
class PriceAsymmetryResult:
    name: str
    frac_cheaper: float | None
    mean_price_ratio: float | None
    n: int
    n_cases: int
    n_skipped: int
    skip_reasons: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def price_asymmetry(pairs: Pairs, catalog: Catalog, k: int, *, name: str = "price_asymmetry") -> PriceAsymmetryResult:
    """Compare top-k prediction prices with the most expensive priced query item.

    ``frac_cheaper`` counts strictly cheaper predictions; ``mean_price_ratio``
    is the geometric mean of price(pred) / price(anchor) over positively
    priced predictions.
    """
    skips: Counter[str] = Counter()
    cheaper = n = cases = 0
    log_ratios = []
    for case, pred in pairs:
        if not pred:
            skips["empty_prediction"] += 1
            continue
        qprices = [p for p in (catalog.price(i) for i in case.query) if p is not None]
        if not qprices:
            skips["query_unpriced"] += 1
            continue
        anchor = max(qprices)
        if anchor <= 0:
            skips["query_unpriced"] += 1
            continue
        priced = [p for p in (catalog.price(i) for i in pred.items[:k]) if p is not None]
        if not priced:
            skips["prediction_unpriced"] += 1
            continue
        cases += 1
        for p in priced:
            n += 1
            cheaper += p < anchor
            if p > 0:
                log_ratios.append(math.log(p / anchor))
    return PriceAsymmetryResult(
        name,
        cheaper / n if n else None,
        math.exp(math.fsum(log_ratios) / len(log_ratios)) if log_ratios else None,
        n,
        cases,
        sum(skips.values()),
        dict(sorted(skips.items())),
    )
