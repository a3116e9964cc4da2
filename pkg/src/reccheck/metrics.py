"""Point-wise metrics over aligned (TestCase, PredictionList) pairs.

Empty predictions are *skips*: they are left out of HR and MRR denominators
and reported in ``n_skipped``.

Popularity Bias@k is defined here as the mean training-popularity share
``count(item) / sum(counts)`` over every recommended slot. This is a choice
of this package, not a standard definition.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

from .dataset import TestCase
from .models import PredictionList

Pairs = Sequence[tuple[TestCase, PredictionList]]


@dataclass(frozen=True)
class MetricResult:
    name: str
    k: int
    value: float | None
    n_cases: int
    n_skipped: int

    def to_dict(self) -> dict:
        return asdict(self)


def hit_rank(case: TestCase, pred: PredictionList, k: int, any_ground_truth: bool = False) -> int | None:
    """1-based rank of the target within the top ``k``, or None on a miss."""
    targets = set(case.ground_truth) if any_ground_truth else {case.target}
    for rank, item in enumerate(pred.items[:k], start=1):
        if item in targets:
            return rank
    return None


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")


def hit_rate_at_k(pairs: Pairs, k: int, *, any_ground_truth: bool = False) -> MetricResult:
    _check_k(k)
    hits = n = skipped = 0
    for case, pred in pairs:
        if not pred:
            skipped += 1
            continue
        n += 1
        hits += hit_rank(case, pred, k, any_ground_truth) is not None
    return MetricResult(f"HR@{k}", k, hits / n if n else None, n, skipped)


def mrr_at_k(pairs: Pairs, k: int, *, any_ground_truth: bool = False) -> MetricResult:
    _check_k(k)
    total = 0.0
    n = skipped = 0
    for case, pred in pairs:
        if not pred:
            skipped += 1
            continue
        n += 1
        rank = hit_rank(case, pred, k, any_ground_truth)
        if rank is not None:
            total += 1.0 / rank
    return MetricResult(f"MRR@{k}", k, total / n if n else None, n, skipped)


def coverage_at_k(pairs: Pairs, k: int, catalog_size: int) -> MetricResult:
    """Distinct items recommended anywhere in a top-k, over the catalog size."""
    _check_k(k)
    if catalog_size < 1:
        raise ValueError("catalog_size must be >= 1")
    seen: set[str] = set()
    skipped = 0
    for _, pred in pairs:
        if not pred:
            skipped += 1
        seen.update(pred.items[:k])
    return MetricResult(f"Coverage@{k}", k, len(seen) / catalog_size, len(pairs) - skipped, skipped)


def popularity_bias_at_k(pairs: Pairs, k: int, popularity: Mapping[str, int]) -> MetricResult:
    """Mean popularity share of recommended items; unseen items count as 0."""
    _check_k(k)
    total = sum(popularity.values())
    if total <= 0:
        raise ValueError("popularity counts must have a positive total")
    count_sum = slots = skipped = 0
    for _, pred in pairs:
        if not pred:
            skipped += 1
            continue
        for item in pred.items[:k]:
            count_sum += popularity.get(item, 0)
            slots += 1
    # one division keeps the result exact up to a single rounding
    value = count_sum / (total * slots) if slots else None
    return MetricResult(f"PopularityBias@{k}", k, value, len(pairs) - skipped, skipped)
