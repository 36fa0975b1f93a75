"""Prompt assembly and the query engine.

Prompt templates are fixed strings (documented in README.md) over four
variables: prompt type, persona, query, and retrieved context. The engine
wires the full answer path: enhance, classify, route, retrieve, render,
complete, and append the trace record.
"""
from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone

from .config import PipelineConfig
from .ingestion import Chunk
from .llmclient import ChatMessage, Completion, DecodingParams, LlmClient, LlmError
from .querypipeline import EnhancedQuery, Intent, RoutingDecision, classify_intent, enhance_query, route
from .retrieval import RankedList, Retriever, make_retriever

DEFAULT_PROMPT_TOKEN_BUDGET = 3072
EPOCH_TS = "1970-01-01T00:00:00Z"

PERSONAS: dict[str, tuple[str, str]] = {
    "financial_advisor": (
        "Financial Advisor",
        "You are a helpful and precise financial advisor.",
    ),
    "risk_analyst": (
        "Risk Analyst",
        "You are a meticulous risk analyst who weighs downside scenarios and flags uncertainty.",
    ),
}

FEW_SHOT_EXAMPLES = (
    (
        "What was Acme Corp's operating margin in fiscal 2022?",
        "Acme Corp reported an operating margin of 18.4% in fiscal 2022 [1].",
    ),
    (
        "How much cash did Globex hold at year end?",
        "Globex held $3.1B in cash and equivalents at year end [1].",
    ),
)

_RAG_INSTRUCTION = (
    "Use the following information to answer the question below. "
    "Cite the numbers of the documents you rely on, e.g. [1]."
)
_CLOSED_BOOK_INSTRUCTION = "Answer the question below."
_COT_SUFFIX = "Think step by step, then state the final answer."


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class Prompt:
    prompt_type: str
    persona: str | None
    rendered_text: str
    context_chunk_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "prompt_type": self.prompt_type,
            "persona": self.persona,
            "rendered_text": self.rendered_text,
            "context_chunk_ids": list(self.context_chunk_ids),
        }


def build_prompt(
    prompt_type: str,
    persona: str | None,
    query: str,
    contexts: list[Chunk],
) -> Prompt:
    """Render the prompt; contexts appear numbered [1..n] in rank order."""
    if prompt_type == "persona":
        if not persona:
            raise GenerationError("prompt_type 'persona' requires a persona id")
        if persona not in PERSONAS:
            raise GenerationError(
                f"unknown persona '{persona}': expected one of {sorted(PERSONAS)}"
            )
    parts: list[str] = []
    if prompt_type == "persona" and persona:
        name, description = PERSONAS[persona]
        parts.append(f"[Persona: {name}]\n\n{description}")
    if prompt_type == "few_shot":
        shots = []
        for i, (q, a) in enumerate(FEW_SHOT_EXAMPLES, start=1):
            shots.append(f"Example {i}:\nQuestion: {q}\nAnswer: {a}")
        parts.append("\n\n".join(shots))
    parts.append(_RAG_INSTRUCTION if contexts else _CLOSED_BOOK_INSTRUCTION)
    parts.append(f"Question: {query}")
    if contexts:
        doc_lines = "\n".join(f'[{i}] "{c.text}"' for i, c in enumerate(contexts, start=1))
        parts.append(f"Documents:\n{doc_lines}")
    if prompt_type == "chain_of_thought":
        parts.append(_COT_SUFFIX)
    return Prompt(
        prompt_type=prompt_type,
        persona=persona if prompt_type == "persona" else None,
        rendered_text="\n\n".join(parts),
        context_chunk_ids=tuple(c.chunk_id for c in contexts),
    )


@dataclass(frozen=True)
class AnswerRecord:
    query_id: str
    original_query: str
    enhanced_query: str
    enhancement_source: str
    intent: Intent
    routing: RoutingDecision
    retriever: dict | None
    ranked: RankedList | None
    prompt: Prompt
    completion: Completion | None
    decoding: DecodingParams
    snapshot_id: str | None
    started_at: str
    finished_at: str
    error: str | None = None

    def to_dict(self) -> dict:
        completion = None
        if self.completion is not None:
            completion = {
                "content": self.completion.content,
                "finish_reason": self.completion.finish_reason,
                "usage": {
                    "prompt_tokens": self.completion.usage.prompt_tokens,
                    "completion_tokens": self.completion.usage.completion_tokens,
                    "total_tokens": self.completion.usage.total_tokens,
                },
                "latency_ms": self.completion.latency_ms,
                "retries": self.completion.retries,
                "provider": self.completion.provider,
                "model": self.completion.model,
            }
        return {
            "query_id": self.query_id,
            "original_query": self.original_query,
            "enhanced_query": self.enhanced_query,
            "enhancement_source": self.enhancement_source,
            "intent": self.intent.to_dict(),
            "routing": {
                "mode": self.routing.mode,
                "reason": self.routing.reason,
                "forced": self.routing.forced,
            },
            "retriever": self.retriever,
            "ranked": self.ranked.to_dict() if self.ranked is not None else None,
            "prompt": self.prompt.to_dict(),
            "completion": completion,
            "decoding": {
                "temperature": self.decoding.temperature,
                "top_p": self.decoding.top_p,
                "max_tokens": self.decoding.max_tokens,
                "seed": self.decoding.seed,
            },
            "snapshot_id": self.snapshot_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
        }


class TraceLog:
    """Append-only JSONL sink; writes are serialized through one lock."""

    def __init__(self, path: str | None):
        self.path = path
        self._lock = threading.Lock()

    def append(self, record: AnswerRecord) -> None:
        if self.path is None:
            return
        line = json.dumps(record.to_dict(), sort_keys=True)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class QueryEngine:
    """One configuration epoch of the answer pipeline; immutable once built."""

    def __init__(
        self,
        config: PipelineConfig,
        llm: LlmClient,
        snapshot=None,
        enhancer: LlmClient | None = None,
        trace_path: str | None = None,
        prompt_token_budget: int = DEFAULT_PROMPT_TOKEN_BUDGET,
        deterministic: bool = False,
    ):
        self.config = config
        self.llm = llm
        self.snapshot = snapshot
        self.enhancer = enhancer
        self.trace = TraceLog(trace_path)
        self.prompt_token_budget = prompt_token_budget
        self.deterministic = deterministic
        self._retriever: Retriever | None = (
            make_retriever(config.retriever, snapshot) if snapshot is not None else None
        )

    def decoding_params(self) -> DecodingParams:
        llm_cfg = self.config.llm
        return DecodingParams(
            temperature=llm_cfg.temperature,
            top_p=llm_cfg.top_p,
            max_tokens=llm_cfg.max_tokens,
        )

    def _now(self) -> str:
        if self.deterministic:
            return EPOCH_TS
        return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def _query_id(self, query: str) -> str:
        if self.deterministic:
            return "q-" + hashlib.sha1(query.encode("utf-8")).hexdigest()[:12]
        return "q-" + uuid.uuid4().hex[:12]

    def _contexts_for(self, ranked: RankedList) -> list[Chunk]:
        return [self.snapshot.chunk_by_id(cid) for cid in ranked.chunk_ids()]

    def _render_within_budget(
        self, query: str, contexts: list[Chunk]
    ) -> Prompt:
        """Drop lowest-ranked contexts until the prompt fits the token budget."""
        prompt_cfg = self.config.prompt
        kept = list(contexts)
        prompt = build_prompt(prompt_cfg.prompt_type, prompt_cfg.persona, query, kept)
        while kept and len(prompt.rendered_text.split()) > self.prompt_token_budget:
            kept.pop()
            prompt = build_prompt(prompt_cfg.prompt_type, prompt_cfg.persona, query, kept)
        return prompt

    def answer(self, query: str, force_rag: bool | None = None, query_id: str | None = None) -> AnswerRecord:
        """Run enhance -> classify -> route -> retrieve -> prompt -> complete."""
        started = self._now()
        force = self.config.routing.force_rag if force_rag is None else force_rag
        enhanced: EnhancedQuery = enhance_query(query, self.enhancer)
        intent = classify_intent(enhanced.enhanced)
        decision = route(intent, force_rag=force)
        query_id = query_id or self._query_id(query)

        ranked: RankedList | None = None
        contexts: list[Chunk] = []
        retriever_desc: dict | None = None
        if decision.mode == "rag":
            if self._retriever is None:
                raise GenerationError("rag mode requires a snapshot; ingest documents first")
            ranked = self._retriever.retrieve(enhanced.enhanced, query_id=query_id)
            retriever_desc = self._retriever.descriptor()
            contexts = self._contexts_for(ranked)

        # prompt.context_chunk_ids is a rank-order prefix of ranked's ids
        # whenever the token budget forces trimming
        prompt = self._render_within_budget(enhanced.enhanced, contexts)
        params = self.decoding_params()

        completion: Completion | None = None
        error: str | None = None
        try:
            completion = self.llm.chat_complete(
                [ChatMessage(role="user", content=prompt.rendered_text)], params
            )
        except LlmError as exc:
            error = str(exc)
        record = AnswerRecord(
            query_id=query_id,
            original_query=query,
            enhanced_query=enhanced.enhanced,
            enhancement_source=enhanced.enhancement_source,
            intent=intent,
            routing=decision,
            retriever=retriever_desc,
            ranked=ranked,
            prompt=prompt,
            completion=completion,
            decoding=params,
            snapshot_id=self.snapshot.snapshot_id if self.snapshot is not None else None,
            started_at=started,
            finished_at=self._now(),
            error=error,
        )
        self.trace.append(record)
        if error is not None:
            raise GenerationError(f"llm completion failed: {error}")
        return record
