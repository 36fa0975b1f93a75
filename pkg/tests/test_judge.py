import json

import pytest

from conftest import make_chunk
from finrag.evaluation.judge import (
    JudgeError,
    judge_faithfulness,
    judge_relevancy,
    merge_scores,
)
from finrag.llmclient import MockChatClient, MockScript, ScriptEntry

CONTEXTS = [make_chunk("d1#0", "Nvidia reported net income of $2.7B in Q4 2023.")]


def _judge(*entries: tuple[str, str], default: str = "unmatched") -> MockChatClient:
    return MockChatClient(
        MockScript(
            entries=tuple(ScriptEntry(pattern=p, response=r) for p, r in entries),
            default=default,
        )
    )


class TestJudgeFaithfulness:
    def test_two_of_three_supported(self):
        judge = _judge(
            ("List every factual claim", json.dumps(["c1", "c2", "c3"])),
            ("decide whether it is supported", json.dumps([True, True, False])),
        )
        scores = judge_faithfulness(judge, "Some answer.", CONTEXTS)
        assert scores.faithfulness == pytest.approx(2 / 3)
        assert scores.claims == (("c1", True), ("c2", True), ("c3", False))
        assert scores.flags["faithfulness_below_threshold"] is True  # 0.667 < 0.7

    def test_full_support_scores_one(self):
        judge = _judge(
            ("List every factual claim", json.dumps(["Nvidia reported net income of $2.7B in Q4 2023."])),
            ("decide whether it is supported", json.dumps([True])),
        )
        scores = judge_faithfulness(
            judge, "Nvidia reported net income of $2.7B in Q4 2023.", CONTEXTS
        )
        assert scores.faithfulness == 1.0
        assert scores.flags["faithfulness_below_threshold"] is False

    def test_zero_claims_scores_one_with_flag(self):
        judge = _judge(("List every factual claim", "[]"))
        scores = judge_faithfulness(judge, "Thanks!", CONTEXTS)
        assert scores.faithfulness == 1.0
        assert scores.flags["no_claims"] is True

    def test_exact_arithmetic_over_counts(self):
        for supported, total in [(0, 4), (1, 4), (3, 4), (4, 4), (5, 7)]:
            claims = [f"claim {i}" for i in range(total)]
            labels = [i < supported for i in range(total)]
            judge = _judge(
                ("List every factual claim", json.dumps(claims)),
                ("decide whether it is supported", json.dumps(labels)),
            )
            scores = judge_faithfulness(judge, "answer", CONTEXTS)
            assert scores.faithfulness == supported / total

    def test_unparseable_after_reprompt_raises(self):
        judge = _judge(default="never json")
        with pytest.raises(JudgeError, match="unparseable"):
            judge_faithfulness(judge, "answer", CONTEXTS)

    def test_reprompt_can_recover(self):
        judge = _judge(
            ("strict JSON only", json.dumps(["c1"])),  # reprompt marker present
            ("decide whether it is supported", json.dumps([True])),
            default="garbage first time",
        )
        scores = judge_faithfulness(judge, "answer", CONTEXTS)
        assert scores.faithfulness == 1.0

    def test_label_length_mismatch_is_unparseable(self):
        judge = _judge(
            ("List every factual claim", json.dumps(["c1", "c2"])),
            ("decide whether it is supported", json.dumps([True])),
        )
        with pytest.raises(JudgeError):
            judge_faithfulness(judge, "answer", CONTEXTS)

    def test_empty_contexts_rejected(self):
        with pytest.raises(ValueError, match="contexts"):
            judge_faithfulness(_judge(), "answer", [])

    def test_threshold_boundary_not_flagged_at_exactly_070(self):
        claims = [f"c{i}" for i in range(10)]
        labels = [i < 7 for i in range(10)]
        judge = _judge(
            ("List every factual claim", json.dumps(claims)),
            ("decide whether it is supported", json.dumps(labels)),
        )
        scores = judge_faithfulness(judge, "answer", CONTEXTS, threshold=0.7)
        assert scores.faithfulness == pytest.approx(0.7)
        assert scores.flags["faithfulness_below_threshold"] is False


class TestJudgeRelevancy:
    def test_parse_085_not_flagged(self):
        scores = judge_relevancy(_judge(default="0.85"), "answer", "query")
        assert scores.relevancy == pytest.approx(0.85)
        assert scores.flags["relevancy_below_threshold"] is False

    def test_parse_050_flagged_below_070(self):
        scores = judge_relevancy(_judge(default="0.50"), "answer", "query")
        assert scores.relevancy == pytest.approx(0.5)
        assert scores.flags["relevancy_below_threshold"] is True

    def test_exactly_at_threshold_not_flagged(self):
        scores = judge_relevancy(_judge(default="0.70"), "answer", "query")
        assert scores.flags["relevancy_below_threshold"] is False

    def test_non_numeric_reprompts_then_fails(self):
        judge = _judge(default="very relevant")
        with pytest.raises(JudgeError, match="unparseable"):
            judge_relevancy(judge, "answer", "query")

    def test_out_of_range_rejected(self):
        with pytest.raises(JudgeError):
            judge_relevancy(_judge(default="1.50"), "answer", "query")

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            judge_relevancy(_judge(default="0.5"), "", "query")


class TestMergeScores:
    def test_merges_dimensions_and_flags(self):
        faith = judge_faithfulness(
            _judge(
                ("List every factual claim", json.dumps(["c1"])),
                ("decide whether it is supported", json.dumps([True])),
            ),
            "answer",
            CONTEXTS,
        )
        rel = judge_relevancy(_judge(default="0.85"), "answer", "query")
        merged = merge_scores(faith, rel)
        assert merged.faithfulness == 1.0
        assert merged.relevancy == pytest.approx(0.85)
        assert merged.flags["faithfulness_below_threshold"] is False
        assert merged.flags["relevancy_below_threshold"] is False
        assert merged.claims == faith.claims
