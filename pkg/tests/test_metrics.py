import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finrag.evaluation.metrics import (
    JudgmentError,
    all_metrics,
    average_precision,
    hit_rate_at_k,
    ndcg_at_k,
    precision_at_k,
    recall_at_k,
    reciprocal_rank,
)
from oracles import (
    oracle_ap,
    oracle_hit_rate,
    oracle_mrr,
    oracle_ndcg,
    oracle_precision,
    oracle_recall,
)


class TestHitRate:
    def test_relevant_at_rank_2_k_3(self):
        assert hit_rate_at_k(["x", "r", "y"], {"r"}, 3) == 1.0

    def test_relevant_at_rank_4_k_3(self):
        assert hit_rate_at_k(["a", "b", "c", "r"], {"r"}, 3) == 0.0

    def test_empty_ranked_list(self):
        assert hit_rate_at_k([], {"r"}, 3) == 0.0


class TestReciprocalRank:
    def test_rank_one(self):
        assert reciprocal_rank(["r", "x"], {"r"}) == 1.0

    def test_rank_two(self):
        assert reciprocal_rank(["x", "r"], {"r"}) == 0.5

    def test_miss_is_zero(self):
        assert reciprocal_rank(["x", "y"], {"r"}) == 0.0


class TestPrecision:
    def test_one_of_three(self):
        assert precision_at_k(["r", "x", "y"], {"r"}, 3) == pytest.approx(1 / 3)

    def test_singleton_precision_is_hit_rate_over_k(self):
        # singleton judgments force precision == hit_rate / k
        assert precision_at_k(["x", "r", "y"], {"r"}, 3) == pytest.approx(1.0 / 3)

    def test_fixed_denominator_with_short_list(self):
        assert precision_at_k(["r", "x"], {"r"}, 5) == pytest.approx(0.2)


class TestRecall:
    def test_singleton_hit(self):
        assert recall_at_k(["r"], {"r"}, 3) == 1.0

    def test_partial(self):
        assert recall_at_k(["a", "x"], {"a", "b"}, 2) == 0.5

    def test_empty_judgments_error(self):
        with pytest.raises(JudgmentError):
            recall_at_k(["a"], set(), 1)


class TestAveragePrecision:
    def test_singleton_equals_reciprocal_rank(self):
        for rank in range(1, 8):
            retrieved = [f"x{i}" for i in range(rank - 1)] + ["r"] + ["y1", "y2"]
            assert average_precision(retrieved, {"r"}) == pytest.approx(1.0 / rank)
            assert average_precision(retrieved, {"r"}) == pytest.approx(
                reciprocal_rank(retrieved, {"r"})
            )

    def test_two_relevant_at_ranks_1_and_3(self):
        assert average_precision(["a", "x", "b"], {"a", "b"}) == pytest.approx(5 / 6)

    def test_miss_is_zero(self):
        assert average_precision(["x", "y"], {"r"}) == 0.0

    def test_empty_judgments_error(self):
        with pytest.raises(JudgmentError):
            average_precision(["a"], set())


class TestNdcg:
    def test_singleton_rank_3_k_5(self):
        assert ndcg_at_k(["x", "y", "r", "z", "w"], {"r"}, 5) == pytest.approx(0.5)

    def test_rank_one_is_ideal(self):
        assert ndcg_at_k(["r", "x"], {"r"}, 5) == 1.0

    def test_two_relevant_hand_value(self):
        expected = (1 + 1 / math.log2(4)) / (1 + 1 / math.log2(3))
        assert ndcg_at_k(["a", "x", "b"], {"a", "b"}, 3) == pytest.approx(expected, abs=1e-4)
        assert expected == pytest.approx(0.9197, abs=1e-4)

    def test_miss_is_zero(self):
        assert ndcg_at_k(["x"], {"r"}, 3) == 0.0


def _random_instances(n: int, seed: int):
    rng = random.Random(seed)
    universe = [f"c{i}" for i in range(30)]
    for _ in range(n):
        retrieved = rng.sample(universe, rng.randint(0, 15))
        relevant = set(rng.sample(universe, rng.randint(1, 6)))
        k = rng.randint(1, 12)
        yield retrieved, relevant, k


class TestOracleEquivalence:
    def test_thousand_random_instances_match_brute_force(self):
        for retrieved, relevant, k in _random_instances(1000, seed=20240601):
            assert hit_rate_at_k(retrieved, relevant, k) == pytest.approx(
                oracle_hit_rate(retrieved, relevant, k), abs=1e-9
            )
            assert reciprocal_rank(retrieved, relevant) == pytest.approx(
                oracle_mrr(retrieved, relevant), abs=1e-9
            )
            assert precision_at_k(retrieved, relevant, k) == pytest.approx(
                oracle_precision(retrieved, relevant, k), abs=1e-9
            )
            assert recall_at_k(retrieved, relevant, k) == pytest.approx(
                oracle_recall(retrieved, relevant, k), abs=1e-9
            )
            assert average_precision(retrieved, relevant) == pytest.approx(
                oracle_ap(retrieved, relevant), abs=1e-9
            )
            assert ndcg_at_k(retrieved, relevant, k) == pytest.approx(
                oracle_ndcg(retrieved, relevant, k), abs=1e-9
            )


@st.composite
def _instance(draw):
    universe = [f"c{i}" for i in range(20)]
    retrieved = draw(st.lists(st.sampled_from(universe), max_size=12, unique=True))
    relevant = draw(st.sets(st.sampled_from(universe), min_size=1, max_size=5))
    k = draw(st.integers(min_value=1, max_value=10))
    return retrieved, relevant, k


class TestProperties:
    @given(_instance())
    @settings(max_examples=200)
    def test_all_outputs_in_unit_interval(self, instance):
        retrieved, relevant, k = instance
        for value in all_metrics(retrieved, relevant, k).values():
            assert 0.0 <= value <= 1.0

    @given(_instance())
    @settings(max_examples=200)
    def test_permuting_tail_after_last_relevant_preserves_mrr(self, instance):
        retrieved, relevant, k = instance
        last_rel = max((i for i, c in enumerate(retrieved) if c in relevant), default=-1)
        if last_rel < 0 or last_rel >= len(retrieved) - 2:
            return
        head, tail = retrieved[: last_rel + 1], retrieved[last_rel + 1 :]
        shuffled = list(reversed(tail))
        assert reciprocal_rank(head + shuffled, relevant) == reciprocal_rank(retrieved, relevant)

    @given(_instance())
    @settings(max_examples=200)
    def test_prepending_irrelevant_strictly_decreases_rank_metrics(self, instance):
        retrieved, relevant, k = instance
        if not any(c in relevant for c in retrieved):
            return
        irrelevant = "zzz-not-relevant"
        assert irrelevant not in relevant
        worse = [irrelevant] + retrieved
        assert reciprocal_rank(worse, relevant) < reciprocal_rank(retrieved, relevant)
        assert average_precision(worse, relevant) < average_precision(retrieved, relevant)
        if any(c in relevant for c in retrieved[:k]):
            n = len(retrieved)
            assert ndcg_at_k(worse, relevant, n + 1) < ndcg_at_k(retrieved, relevant, n + 1)

    @given(_instance())
    @settings(max_examples=200)
    def test_singleton_identities(self, instance):
        retrieved, _, k = instance
        relevant = {retrieved[0]} if retrieved else {"r"}
        metrics = all_metrics(retrieved, relevant, k)
        assert metrics["hit_rate"] == pytest.approx(metrics["recall"], abs=1e-12)
        assert metrics["mrr"] == pytest.approx(metrics["ap"], abs=1e-12)
        assert metrics["precision"] == pytest.approx(metrics["hit_rate"] / k, abs=1e-12)
        # rank-discount ordering: NDCG >= MRR for singleton judgments
        assert metrics["ndcg"] + 1e-12 >= metrics["mrr"]


class TestSingletonNdcgVsMrr:
    def test_ndcg_at_least_mrr_for_every_rank(self):
        # 1/log2(r+1) >= 1/r for r >= 1, so NDCG >= MRR at every rank
        for rank in range(1, 50):
            retrieved = [f"x{i}" for i in range(rank - 1)] + ["r"]
            k = len(retrieved)
            assert ndcg_at_k(retrieved, {"r"}, k) >= reciprocal_rank(retrieved, {"r"}) - 1e-12
