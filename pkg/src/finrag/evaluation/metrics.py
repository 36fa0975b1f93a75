"""Ranking metrics over a retrieved list and a binary relevance set.

All six operate on the ordered chunk_ids of one query's retrieval result
plus the set of relevant chunk_ids, and return values in [0, 1].

Conventions that pin the arithmetic down:
- precision@k divides by k even when fewer than k hits were returned;
- reciprocal rank and average precision are 0 when nothing relevant is
  retrieved;
- NDCG uses binary gains (2^rel - 1, so 1 per hit) with the ideal DCG
  truncated at min(|relevant|, k).

With singleton relevance sets these identities hold exactly:
hit_rate == recall, rr == ap, precision == hit_rate / k.
"""
from __future__ import annotations

import math
from collections.abc import Sequence, Set


class JudgmentError(ValueError):
    """Raised when a metric is undefined for the given judgments."""


def hit_rate_at_k(retrieved: Sequence[str], relevant: Set[str], k: int) -> float:
    """1.0 iff any of the first k retrieved ids is relevant."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 1.0 if any(cid in relevant for cid in retrieved[:k]) else 0.0


def reciprocal_rank(retrieved: Sequence[str], relevant: Set[str]) -> float:
    """1 / rank of the first relevant id; 0.0 when none is retrieved."""
    for rank, cid in enumerate(retrieved, start=1):
        if cid in relevant:
            return 1.0 / rank
    return 0.0


def precision_at_k(retrieved: Sequence[str], relevant: Set[str], k: int) -> float:
    """Relevant count among the first k positions divided by k (fixed denominator)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = sum(1 for cid in retrieved[:k] if cid in relevant)
    return hits / k


def recall_at_k(retrieved: Sequence[str], relevant: Set[str], k: int) -> float:
    """Relevant count among the first k positions divided by |relevant|."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not relevant:
        raise JudgmentError("recall undefined: no relevant ids judged for this query")
    hits = sum(1 for cid in retrieved[:k] if cid in relevant)
    return hits / len(relevant)


def average_precision(retrieved: Sequence[str], relevant: Set[str]) -> float:
    """Mean of precision at each relevant position, over |relevant|."""
    if not relevant:
        raise JudgmentError("average precision undefined: no relevant ids judged")
    seen = 0
    total = 0.0
    for rank, cid in enumerate(retrieved, start=1):
        if cid in relevant:
            seen += 1
            total += seen / rank
    return total / len(relevant)


def ndcg_at_k(retrieved: Sequence[str], relevant: Set[str], k: int) -> float:
    """Binary-gain NDCG: DCG normalized by the ideal ranking's DCG at k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, cid in enumerate(retrieved[:k], start=1)
        if cid in relevant
    )
    if dcg == 0.0:
        return 0.0
    ideal = min(len(relevant), k)
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal + 1))
    return dcg / idcg


METRIC_NAMES = ("hit_rate", "mrr", "precision", "recall", "ap", "ndcg")


def all_metrics(retrieved: Sequence[str], relevant: Set[str], k: int) -> dict[str, float]:
    """All six metrics for one query at cutoff k, keyed by report column name."""
    return {
        "hit_rate": hit_rate_at_k(retrieved, relevant, k),
        "mrr": reciprocal_rank(retrieved, relevant),
        "precision": precision_at_k(retrieved, relevant, k),
        "recall": recall_at_k(retrieved, relevant, k),
        "ap": average_precision(retrieved, relevant),
        "ndcg": ndcg_at_k(retrieved, relevant, k),
    }
