"""LLM-as-judge scoring: faithfulness and relevancy.

Faithfulness is a two-step protocol: (1) extract the response's factual
claims as a JSON array, (2) label each claim supported/unsupported against
the numbered contexts as a JSON array of booleans. The score is
supported/total. Relevancy is a single call that must return a bare 0-1
decimal. Every parse gets exactly one reprompt; a second failure raises
JudgeError and the caller marks the query unevaluated.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..ingestion import Chunk
from ..llmclient import ChatMessage, LlmClient, LlmError

_CLAIMS_PROMPT = (
    "List every factual claim made in the answer below.\n"
    'Reply with strict JSON on one line: a JSON array of claim strings, e.g. ["...", "..."].\n\n'
    "Answer:\n{response}"
)
_SUPPORT_PROMPT = (
    "For each numbered claim, decide whether it is supported by the documents.\n"
    "Reply with strict JSON on one line: a JSON array of booleans, one per claim, "
    "in claim order, e.g. [true, false].\n\n"
    "Claims:\n{claims}\n\nDocuments:\n{contexts}"
)
_RELEVANCY_PROMPT = (
    "Rate how well the answer addresses the question, from 0.00 (unrelated) to "
    "1.00 (fully addresses it).\nReply with only the decimal number, two decimals, "
    "nothing else.\n\nQuestion: {query}\n\nAnswer:\n{response}"
)
_REPROMPT_SUFFIX = "\n\nYour previous reply was not parseable. Reply with strict JSON only."

_DECIMAL_RE = re.compile(r"^\s*([01](?:\.\d+)?)\s*$")


class JudgeError(Exception):
    """Judge output stayed unparseable after the one allowed reprompt."""


@dataclass(frozen=True)
class JudgeScores:
    faithfulness: float | None = None
    relevancy: float | None = None
    claims: tuple[tuple[str, bool], ...] = ()
    rationale: str = ""
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "faithfulness": self.faithfulness,
            "relevancy": self.relevancy,
            "claims": [{"claim": c, "supported": s} for c, s in self.claims],
            "rationale": self.rationale,
            "flags": dict(self.flags),
        }


def _ask(judge: LlmClient, prompt: str) -> str:
    return judge.chat_complete([ChatMessage(role="user", content=prompt)]).content


def _ask_parsed(judge: LlmClient, prompt: str, parse):
    """One call plus one reprompt; raises JudgeError when both fail."""
    try:
        raw = _ask(judge, prompt)
    except LlmError as exc:
        raise JudgeError(f"judge call failed: {exc}") from exc
    value = parse(raw)
    if value is not None:
        return value
    try:
        raw = _ask(judge, prompt + _REPROMPT_SUFFIX)
    except LlmError as exc:
        raise JudgeError(f"judge reprompt failed: {exc}") from exc
    value = parse(raw)
    if value is None:
        raise JudgeError(f"judge output unparseable after reprompt: {raw!r}")
    return value


def _parse_string_array(raw: str) -> list[str] | None:
    try:
        obj = json.loads(raw.strip())
    except json.JSONDecodeError:
        return None
    if isinstance(obj, list) and all(isinstance(x, str) for x in obj):
        return obj
    return None


def _parse_bool_array(expected_len: int):
    def parse(raw: str) -> list[bool] | None:
        try:
            obj = json.loads(raw.strip())
        except json.JSONDecodeError:
            return None
        if (
            isinstance(obj, list)
            and len(obj) == expected_len
            and all(isinstance(x, bool) for x in obj)
        ):
            return obj
        return None

    return parse


def _parse_decimal(raw: str) -> float | None:
    match = _DECIMAL_RE.match(raw)
    if match is None:
        return None
    value = float(match.group(1))
    return value if 0.0 <= value <= 1.0 else None


def judge_faithfulness(
    judge: LlmClient,
    response: str,
    contexts: list[Chunk],
    threshold: float = 0.7,
) -> JudgeScores:
    """Proportion of the response's claims supported by the contexts.

    A response with zero extracted claims scores 1.0 and carries a
    "no_claims" flag rather than dividing by zero.
    """
    if not contexts:
        raise ValueError("faithfulness requires non-empty contexts")
    claims = _ask_parsed(judge, _CLAIMS_PROMPT.format(response=response), _parse_string_array)
    if not claims:
        return JudgeScores(
            faithfulness=1.0,
            claims=(),
            rationale="no factual claims extracted",
            flags={"no_claims": True, "faithfulness_below_threshold": False},
        )
    numbered_claims = "\n".join(f"{i}. {c}" for i, c in enumerate(claims, start=1))
    numbered_contexts = "\n".join(f'[{i}] "{c.text}"' for i, c in enumerate(contexts, start=1))
    labels = _ask_parsed(
        judge,
        _SUPPORT_PROMPT.format(claims=numbered_claims, contexts=numbered_contexts),
        _parse_bool_array(len(claims)),
    )
    supported = sum(labels)
    score = supported / len(claims)
    return JudgeScores(
        faithfulness=score,
        claims=tuple(zip(claims, labels)),
        rationale=f"{supported} of {len(claims)} claims supported by the provided documents",
        flags={"no_claims": False, "faithfulness_below_threshold": score < threshold},
    )


def judge_relevancy(
    judge: LlmClient,
    response: str,
    query: str,
    threshold: float = 0.7,
) -> JudgeScores:
    """Scalar query-response alignment in [0, 1], parsed strictly."""
    if not response.strip() or not query.strip():
        raise ValueError("relevancy requires a non-empty response and query")
    score = _ask_parsed(
        judge,
        _RELEVANCY_PROMPT.format(query=query, response=response),
        _parse_decimal,
    )
    return JudgeScores(
        relevancy=score,
        rationale=f"judge scored query-response alignment {score:.2f}",
        flags={"relevancy_below_threshold": score < threshold},
    )


def merge_scores(faith: JudgeScores, rel: JudgeScores) -> JudgeScores:
    flags = dict(faith.flags)
    flags.update(rel.flags)
    rationale = "; ".join(r for r in (faith.rationale, rel.rationale) if r)
    return JudgeScores(
        faithfulness=faith.faithfulness,
        relevancy=rel.relevancy,
        claims=faith.claims,
        rationale=rationale,
        flags=flags,
    )
