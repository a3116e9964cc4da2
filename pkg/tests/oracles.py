"""Naive reference implementations, written without reusing package logic.

Metrics are computed with exact fractions over plain lists so they can
check the package to the last bit (HR, coverage) or to 1e-12 (MRR, bias).
"""
from fractions import Fraction

from reccheck.dataset import TestCase
from reccheck.models import PredictionList

ITEMS = [f"i{n}" for n in range(30)]


def fuzz_pairs(rng, n, items=ITEMS):
    """``n`` random (TestCase, PredictionList) pairs drawn with ``rng`` (a random.Random)."""
    pairs = []
    for _ in range(n):
        chosen = rng.sample(items, rng.randint(2, 6))
        case = TestCase(tuple(chosen[:-1]), (chosen[-1],))
        pool = [i for i in items if i not in case.query]
        pred = PredictionList(rng.sample(pool, rng.randint(0, 12)))
        pairs.append((case, pred))
    return pairs


def plain(pairs):
    """Strip package types: (query, ground_truth) lists and prediction lists."""
    return [(list(c.query), list(c.ground_truth)) for c, _ in pairs], [list(p.items) for _, p in pairs]


def brute_hr(cases, preds, k):
    num = den = 0
    for i in range(len(cases)):
        items = list(preds[i])
        if len(items) == 0:
            continue
        den += 1
        target = cases[i][1][0]
        found = False
        for j in range(min(k, len(items))):
            if items[j] == target:
                found = True
        if found:
            num += 1
    return None if den == 0 else Fraction(num, den)


def brute_mrr(cases, preds, k):
    total = Fraction(0)
    den = 0
    for i in range(len(cases)):
        items = list(preds[i])
        if len(items) == 0:
            continue
        den += 1
        target = cases[i][1][0]
        for j in range(min(k, len(items))):
            if items[j] == target:
                total += Fraction(1, j + 1)
                break
    return None if den == 0 else total / den


def brute_coverage(preds, k, catalog_size):
    seen = []
    for items in preds:
        for j in range(min(k, len(items))):
            if items[j] not in seen:
                seen.append(items[j])
    return Fraction(len(seen), catalog_size)


def brute_popularity_bias(preds, k, popularity):
    total = 0
    for v in popularity.values():
        total += v
    acc = Fraction(0)
    slots = 0
    for items in preds:
        for j in range(min(k, len(items))):
            acc += Fraction(popularity.get(items[j], 0), total)
            slots += 1
    return None if slots == 0 else acc / slots


def tree_distance_by_walking(a, b):
    """Edge count between two category paths by climbing parent links."""
    parents = {}
    for path in (a, b):
        for i in range(len(path) + 1):
            node = tuple(path[:i])
            parents[node] = tuple(path[: i - 1]) if i else None
    ancestors_a = []
    node = tuple(a)
    while node is not None:
        ancestors_a.append(node)
        node = parents[node]
    steps_b = 0
    node = tuple(b)
    while node not in ancestors_a:
        node = parents[node]
        steps_b += 1
    return ancestors_a.index(node) + steps_b
