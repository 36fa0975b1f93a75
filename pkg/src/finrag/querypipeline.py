"""Query preprocessing: rewrite, intent classification, retrieval routing.

The intent classifier is a deterministic rule engine (regex + lexicons), so
the whole pipeline runs offline and every test is reproducible. Rules fire
in a fixed precedence order: numerical, comparative, temporal,
conversational, factual.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .llmclient import ChatMessage, LlmClient, LlmError

logger = logging.getLogger(__name__)

QTYPES = ("factual", "numerical", "comparative", "temporal", "conversational")

_CURRENCY_RE = re.compile(r"[$€£¥]|\b(?:usd|eur|gbp|dollars?|euros?|cents?)\b", re.IGNORECASE)
_PERCENT_RE = re.compile(r"%|\bpercent(?:age)?\b|\bbasis points?\b", re.IGNORECASE)
_NUMBER_WORD_RE = re.compile(
    r"\b(?:hundred|thousand|million|billion|trillion)s?\b", re.IGNORECASE
)
_METRIC_WORDS = (
    "income", "revenue", "profit", "earnings", "eps", "margin", "sales",
    "cash flow", "assets", "liabilities", "dividend", "expenses", "ebitda",
    "net income", "gross margin", "operating income", "market cap", "debt",
)
_HOW_MUCH_RE = re.compile(r"\bhow (?:much|many)\b", re.IGNORECASE)
_WHAT_WAS_RE = re.compile(r"\bwhat (?:was|were|is|are)\b", re.IGNORECASE)
_COMPARATIVE_RE = re.compile(
    r"\bversus\b|\bvs\.?\b|\bcompared?\b|\bmore than\b|\bless than\b", re.IGNORECASE
)
_YEAR_RE = re.compile(r"\b(?:19|20)\d{2}\b")
_QUARTER_RE = re.compile(r"\bQ[1-4]\b")
_MONTHS = (
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
)
_MONTH_RE = re.compile(r"\b(?:" + "|".join(_MONTHS) + r")\b", re.IGNORECASE)
_GREETING_RE = re.compile(
    r"^\s*(?:hi|hello|hey|howdy|thanks|thank you|how are you|good (?:morning|afternoon|evening)|"
    r"what'?s up|bye|goodbye)\b",
    re.IGNORECASE,
)

# Excluded from entity runs only in sentence-initial position.
_INITIAL_STOPWORDS = frozenset(
    """what how who when where why which the a an is are was were did do does
    can could should would will in on of for to and or with compare show tell
    give list hi hello hey thanks please""".split()
)

_INTERROGATIVE_RE = re.compile(
    r"^\s*(?:what|how|who|when|where|why|which|is|are|was|were|did|do|does|can|could|should|would|will)\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class Intent:
    qtype: str
    needs_retrieval: bool
    entities: tuple[str, ...] = ()
    date_refs: tuple[str, ...] = ()
    confidence: float = 1.0  # reserved; routing is binary

    def to_dict(self) -> dict:
        return {
            "type": self.qtype,
            "needs_retrieval": self.needs_retrieval,
            "entities": list(self.entities),
            "date_refs": list(self.date_refs),
        }


@dataclass(frozen=True)
class EnhancedQuery:
    original: str
    enhanced: str
    enhancement_source: str  # llm | rules | none


@dataclass(frozen=True)
class RoutingDecision:
    mode: str  # rag | closed_book
    reason: str
    forced: bool = False


def _dedup(items: list[str]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for item in items:
        seen.setdefault(item, None)
    return tuple(seen)


def _date_refs(query: str) -> tuple[str, ...]:
    refs = []
    for tok in query.split():
        bare = tok.strip(".,;:!?()\"'")
        if _QUARTER_RE.fullmatch(bare) or _YEAR_RE.fullmatch(bare) or _MONTH_RE.fullmatch(bare):
            refs.append(bare)
    return _dedup(refs)


def _entities(query: str, date_tokens: frozenset[str]) -> tuple[str, ...]:
    """Maximal capitalized token runs, minus sentence-initial stopwords and dates."""
    entities: list[str] = []
    run: list[str] = []
    sentence_start = True
    for raw in query.split():
        bare = raw.strip(".,;:!?()\"'")
        word = bare[:-2] if bare.endswith(("'s", "’s")) else bare
        is_cap = bool(word) and word[0].isupper() and any(c.isalpha() for c in word)
        skip_initial = sentence_start and word.lower() in _INITIAL_STOPWORDS
        if is_cap and not skip_initial and word not in date_tokens:
            run.append(word)
            if raw.endswith((".", "!", "?", ",", ";", ":")):
                entities.append(" ".join(run))  # punctuation closes the run
                run = []
        else:
            if run:
                entities.append(" ".join(run))
                run = []
        sentence_start = raw.endswith((".", "!", "?"))
    if run:
        entities.append(" ".join(run))
    return _dedup(entities)


def classify_intent(query: str) -> Intent:
    """Classify a query into exactly one question type plus routing metadata.

    Deterministic and total: any string maps to one qtype. Quarter/year/month
    tokens land in date_refs, not entities.
    """
    if not query.strip():
        return Intent(qtype="conversational", needs_retrieval=False)
    dates = _date_refs(query)
    entities = _entities(query, frozenset(dates))

    is_numerical = bool(
        _CURRENCY_RE.search(query)
        or _PERCENT_RE.search(query)
        or _NUMBER_WORD_RE.search(query)
        or _HOW_MUCH_RE.search(query)
        or (_WHAT_WAS_RE.search(query) and any(m in query.lower() for m in _METRIC_WORDS))
    )
    if is_numerical:
        qtype = "numerical"
    elif _COMPARATIVE_RE.search(query):
        qtype = "comparative"
    elif dates:
        qtype = "temporal"
    elif _GREETING_RE.search(query):
        qtype = "conversational"
    else:
        qtype = "factual"
    return Intent(
        qtype=qtype,
        needs_retrieval=qtype != "conversational",
        entities=entities,
        date_refs=dates,
    )


_ENHANCE_INSTRUCTION = (
    "Rewrite the user's question as a single standalone financial question. "
    "Reply with the rewritten question on one line and nothing else.\n\n"
    "User question: {query}"
)


def _rule_cleanup(query: str) -> str:
    cleaned = " ".join(query.split())
    if _INTERROGATIVE_RE.match(cleaned) and not cleaned.endswith("?"):
        cleaned = cleaned.rstrip(".!") + "?"
    return cleaned


def enhance_query(query: str, llm: LlmClient | None = None) -> EnhancedQuery:
    """Rewrite the query via the LLM, with a rule-based fallback.

    Never raises: on any LLM failure or empty response the rule cleanups
    (collapse whitespace, terminal "?" for interrogatives) apply instead.
    If even those change nothing, the query passes through with source
    "none".
    """
    if llm is not None:
        try:
            completion = llm.chat_complete(
                [ChatMessage(role="user", content=_ENHANCE_INSTRUCTION.format(query=query))]
            )
            rewritten = completion.content.strip().strip('"').strip("'").strip()
            if rewritten and "\n" not in rewritten:
                return EnhancedQuery(original=query, enhanced=rewritten, enhancement_source="llm")
        except LlmError:
            pass
    cleaned = _rule_cleanup(query)
    if cleaned != query:
        return EnhancedQuery(original=query, enhanced=cleaned, enhancement_source="rules")
    return EnhancedQuery(original=query, enhanced=query, enhancement_source="none")


def expand_keywords(query: str, enabled: bool = False) -> str:
    """Keyword/synonym expansion hook. Deliberately a no-op: the flag is
    accepted and its inert status logged, so enabling it never changes
    retrieval behavior silently."""
    if enabled:
        logger.info("keyword expansion requested but is a no-op in this version")
    return query


def route(intent: Intent, force_rag: bool = False) -> RoutingDecision:
    """RAG iff the intent needs retrieval or the user forces it."""
    if force_rag:
        return RoutingDecision(mode="rag", reason="force_rag override", forced=True)
    if intent.needs_retrieval:
        return RoutingDecision(
            mode="rag", reason=f"{intent.qtype} intent requires retrieval", forced=False
        )
    return RoutingDecision(
        mode="closed_book", reason="conversational intent answered closed-book", forced=False
    )
