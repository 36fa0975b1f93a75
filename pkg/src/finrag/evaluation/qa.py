"""Document-derived QA benchmark generation.

Chunks are sampled round-robin across documents (seeded shuffle) and an LLM
is asked for one question per requested type, answerable solely from the
chunk, as strict JSON. Malformed responses skip the chunk-type pair;
duplicate questions (after whitespace/case normalization) are dropped.

The relevance judgment for every generated pair is the singleton set
holding its source chunk — which is what makes hit_rate == recall and
mrr == ap in every report cell over these datasets.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass

from ..indexstore import IndexSnapshot
from ..llmclient import ChatMessage, LlmClient, LlmError

logger = logging.getLogger(__name__)

QA_TYPES = ("factual", "numerical", "comparative")

_QA_PROMPT = (
    "Read the passage below and write one {qtype} question that can be answered "
    "solely from the passage, together with its answer.\n"
    'Reply with strict JSON on one line: {{"question": "...", "answer": "..."}}\n\n'
    "Passage:\n{text}"
)


@dataclass(frozen=True)
class QaPair:
    qa_id: str
    question: str
    reference_answer: str
    source_chunk_id: str
    qtype: str

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "question": self.question,
            "reference_answer": self.reference_answer,
            "source_chunk_id": self.source_chunk_id,
            "qtype": self.qtype,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "QaPair":
        return cls(
            qa_id=obj["qa_id"],
            question=obj["question"],
            reference_answer=obj["reference_answer"],
            source_chunk_id=obj["source_chunk_id"],
            qtype=obj["qtype"],
        )


def _normalize_question(question: str) -> str:
    return " ".join(question.lower().split())


def _qa_id(source_chunk_id: str, qtype: str, normalized_question: str) -> str:
    raw = f"{source_chunk_id}|{qtype}|{normalized_question}".encode("utf-8")
    return "qa-" + hashlib.sha1(raw).hexdigest()[:12]


def _round_robin_chunks(snapshot: IndexSnapshot, seed: int):
    """Yield chunks cycling over documents; order is a pure function of seed."""
    rng = random.Random(seed)
    by_doc: dict[str, list] = {}
    for chunk in snapshot.chunks:
        by_doc.setdefault(chunk.doc_id, []).append(chunk)
    doc_ids = sorted(by_doc)
    rng.shuffle(doc_ids)
    queues = []
    for doc_id in doc_ids:
        chunks = sorted(by_doc[doc_id], key=lambda c: c.chunk_id)
        rng.shuffle(chunks)
        queues.append(chunks)
    while any(queues):
        for queue in queues:
            if queue:
                yield queue.pop(0)


def _parse_qa_json(text: str) -> tuple[str, str] | None:
    try:
        obj = json.loads(text.strip())
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    question = obj.get("question")
    answer = obj.get("answer")
    if not isinstance(question, str) or not isinstance(answer, str):
        return None
    if not question.strip() or not answer.strip():
        return None
    return question.strip(), answer.strip()


def generate_qa_pairs(
    snapshot: IndexSnapshot,
    llm: LlmClient,
    n: int,
    types: set[str] | None = None,
    seed: int = 13,
) -> list[QaPair]:
    """Generate up to n QA pairs; stops early only when chunks run out.

    LLM failures and unparseable responses skip that chunk-type pair and
    are logged; the partial list is still returned.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if snapshot.N == 0:
        raise ValueError("snapshot is empty")
    requested = [t for t in QA_TYPES if types is None or t in types]
    if not requested:
        raise ValueError(f"types must include at least one of {QA_TYPES}")

    pairs: list[QaPair] = []
    seen_questions: set[str] = set()
    skipped = 0
    failures = 0
    for chunk in _round_robin_chunks(snapshot, seed):
        for qtype in requested:
            if len(pairs) >= n:
                break
            prompt = _QA_PROMPT.format(qtype=qtype, text=chunk.text)
            try:
                completion = llm.chat_complete([ChatMessage(role="user", content=prompt)])
            except LlmError as exc:
                failures += 1
                logger.warning("qa generation call failed for %s/%s: %s", chunk.chunk_id, qtype, exc)
                continue
            parsed = _parse_qa_json(completion.content)
            if parsed is None:
                skipped += 1
                logger.warning(
                    "qa generation returned malformed JSON for %s/%s; skipped",
                    chunk.chunk_id,
                    qtype,
                )
                continue
            question, answer = parsed
            normalized = _normalize_question(question)
            if normalized in seen_questions:
                continue
            seen_questions.add(normalized)
            pairs.append(
                QaPair(
                    qa_id=_qa_id(chunk.chunk_id, qtype, normalized),
                    question=question,
                    reference_answer=answer,
                    source_chunk_id=chunk.chunk_id,
                    qtype=qtype,
                )
            )
        if len(pairs) >= n:
            break
    if skipped or failures:
        logger.warning("qa generation finished with %d skipped, %d failed calls", skipped, failures)
    return pairs


def judgments_for(pairs: list[QaPair]) -> dict[str, set[str]]:
    """Singleton relevance judgments: each pair's source chunk."""
    return {pair.qa_id: {pair.source_chunk_id} for pair in pairs}


def save_dataset(pairs: list[QaPair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_dict(), sort_keys=True) + "\n")


def load_dataset(path: str) -> list[QaPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pairs.append(QaPair.from_dict(json.loads(line)))
    return pairs
