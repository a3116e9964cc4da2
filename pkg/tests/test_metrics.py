import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reccheck.dataset import TestCase
from reccheck.metrics import coverage_at_k, hit_rate_at_k, mrr_at_k, popularity_bias_at_k
from reccheck.models import PredictionList, constant_model, oracle_model

from oracles import brute_coverage, brute_hr, brute_mrr, brute_popularity_bias, fuzz_pairs, plain

ITEMS = [f"i{n}" for n in range(30)]


def case(q, gt):
    return TestCase(tuple(q), tuple(gt))


class TestHitRate:
    def test_oracle(self):
        cases = [case("ab", "c"), case("x", "y")]
        preds = oracle_model(cases).predict([c.query for c in cases], 1)
        assert hit_rate_at_k(list(zip(cases, preds)), 1).value == 1.0

    def test_never_correct(self):
        cases = [case("ab", "c"), case("x", "y")]
        preds = constant_model(["z"]).predict([c.query for c in cases], 10)
        assert hit_rate_at_k(list(zip(cases, preds)), 10).value == 0.0

    def test_one_hit_at_rank_3(self):
        pairs = [(case("a", "t"), PredictionList(["x", "y", "t"])), (case("b", "u"), PredictionList(["x"]))]
        assert hit_rate_at_k(pairs, 10).value == 0.5

    def test_all_skipped(self):
        r = hit_rate_at_k([(case("a", "b"), PredictionList())], 5)
        assert (r.value, r.n_cases, r.n_skipped) == (None, 0, 1)

    def test_any_ground_truth(self):
        pairs = [(case("a", "tu"), PredictionList(["u"]))]
        assert hit_rate_at_k(pairs, 1).value == 0.0
        assert hit_rate_at_k(pairs, 1, any_ground_truth=True).value == 1.0


class TestMRR:
    def test_oracle(self):
        pairs = [(case("a", "b"), PredictionList(["b"]))] * 3
        assert mrr_at_k(pairs, 1).value == 1.0

    def test_rank_4(self):
        assert mrr_at_k([(case("a", "t"), PredictionList(["w", "x", "y", "t"]))], 10).value == 0.25

    def test_rank_2_and_miss(self):
        pairs = [(case("a", "t"), PredictionList(["x", "t"])), (case("a", "t"), PredictionList(["x"]))]
        assert mrr_at_k(pairs, 10).value == 0.25


class TestCoverage:
    def test_constant_one_item(self):
        pairs = [(case("a", "b"), PredictionList(["z"]))] * 4
        assert coverage_at_k(pairs, 10, 100).value == 0.01

    def test_full(self):
        pairs = [(case("a", "b"), PredictionList(["x", "y"])), (case("x", "b"), PredictionList(["a", "z"]))]
        assert coverage_at_k(pairs, 10, 4).value == 1.0

    def test_duplication_invariant(self):
        pairs = fuzz_pairs(random.Random(1), 50)
        assert coverage_at_k(pairs, 5, 30).value == coverage_at_k(pairs * 2, 5, 30).value


class TestPopularityBias:
    def test_single_item_corpus(self):
        assert popularity_bias_at_k([(case("a", "b"), PredictionList(["z"]))], 10, {"z": 7}).value == 1.0

    def test_unseen_only(self):
        assert popularity_bias_at_k([(case("a", "b"), PredictionList(["q"]))], 10, {"z": 7}).value == 0.0

    def test_uniform(self):
        pop = {f"i{n}": 3 for n in range(8)}
        pairs = [(case("x", "y"), PredictionList(["i1", "i2", "i5"])), (case("x", "y"), PredictionList(["i7"]))]
        assert popularity_bias_at_k(pairs, 10, pop).value == pytest.approx(1 / 8, abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_fuzz_against_oracle(seed):
    rng = random.Random(seed)
    pairs = fuzz_pairs(rng, 200)
    cases, preds = plain(pairs)
    pop = {i: rng.randint(0, 50) for i in ITEMS[:20]}
    for k in (1, 3, 10):
        assert hit_rate_at_k(pairs, k).value == float(brute_hr(cases, preds, k))
        assert mrr_at_k(pairs, k).value == pytest.approx(float(brute_mrr(cases, preds, k)), abs=1e-12)
        assert coverage_at_k(pairs, k, 40).value == float(brute_coverage(preds, k, 40))
        assert popularity_bias_at_k(pairs, k, pop).value == pytest.approx(
            float(brute_popularity_bias(preds, k, pop)), abs=1e-12
        )


@settings(max_examples=100)
@given(st.integers(0, 10**6))
def test_monotone_in_k_and_mrr_below_hr(seed):
    pairs = fuzz_pairs(random.Random(seed), 30)
    hrs = [hit_rate_at_k(pairs, k).value for k in range(1, 13)]
    mrrs = [mrr_at_k(pairs, k).value for k in range(1, 13)]
    if hrs[0] is None:
        return
    assert hrs == sorted(hrs)
    assert mrrs == sorted(mrrs)
    assert all(m <= h for m, h in zip(mrrs, hrs))


def test_bad_k():
    with pytest.raises(ValueError):
        hit_rate_at_k([], 0)
