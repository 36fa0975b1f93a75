"""Retriever strategies: BM25, vector, hybrid fusion, auto-merging alias.

Hybrid fusion min-max-normalizes each source's top-k pool, then combines
with configured weights; a chunk found by only one source contributes 0 for
the missing source. Auto-merging is the vector strategy under its own
descriptor, matching its measured behavior. Ties everywhere break by
ascending chunk_id.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .config import RetrieverConfig
from .embedding import EmbeddingProvider
from .indexstore import IndexSnapshot, ScoredHit, analyze, bm25_search, reconstruct_provider, vector_search

RETRIEVER_TYPES = ("bm25", "vector", "hybrid", "auto_merging")


class RetrievalError(ValueError):
    pass


@dataclass(frozen=True)
class FusionWeights:
    w_bm25: float
    w_vector: float


@dataclass(frozen=True)
class RankedHit:
    chunk_id: str
    score: float
    rank: int  # 1-based, contiguous
    bm25_raw: float | None = None
    vector_raw: float | None = None

    def to_dict(self) -> dict:
        out: dict = {"chunk_id": self.chunk_id, "score": self.score, "rank": self.rank}
        if self.bm25_raw is not None:
            out["bm25_raw"] = self.bm25_raw
        if self.vector_raw is not None:
            out["vector_raw"] = self.vector_raw
        return out


@dataclass(frozen=True)
class RankedList:
    query_id: str
    descriptor: dict  # {type, top_k, weights?}
    hits: tuple[RankedHit, ...]

    def chunk_ids(self) -> list[str]:
        return [h.chunk_id for h in self.hits]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "retriever": self.descriptor,
            "hits": [h.to_dict() for h in self.hits],
        }


def minmax_normalize(hits: list[ScoredHit]) -> list[tuple[str, float]]:
    """(score - min) / (max - min); degenerate lists map every score to 1.0."""
    if not hits:
        return []
    scores = [h.raw_score for h in hits]
    low, high = min(scores), max(scores)
    if high == low:
        return [(h.chunk_id, 1.0) for h in hits]
    return [(h.chunk_id, (h.raw_score - low) / (high - low)) for h in hits]


def fuse(
    bm25_hits: list[ScoredHit],
    vector_hits: list[ScoredHit],
    weights: FusionWeights,
    k: int,
    query_id: str = "",
) -> RankedList:
    """Weighted linear interpolation of min-max-normalized source scores."""
    norm_bm25 = dict(minmax_normalize(bm25_hits))
    norm_vector = dict(minmax_normalize(vector_hits))
    raw_bm25 = {h.chunk_id: h.raw_score for h in bm25_hits}
    raw_vector = {h.chunk_id: h.raw_score for h in vector_hits}
    fused = {
        cid: weights.w_bm25 * norm_bm25.get(cid, 0.0) + weights.w_vector * norm_vector.get(cid, 0.0)
        for cid in set(norm_bm25) | set(norm_vector)
    }
    ordered = sorted(fused.items(), key=lambda pair: (-pair[1], pair[0]))[:k]
    hits = tuple(
        RankedHit(
            chunk_id=cid,
            score=score,
            rank=i + 1,
            bm25_raw=raw_bm25.get(cid),
            vector_raw=raw_vector.get(cid),
        )
        for i, (cid, score) in enumerate(ordered)
    )
    descriptor = {
        "type": "hybrid",
        "top_k": k,
        "weights": {"bm25": weights.w_bm25, "vector": weights.w_vector},
    }
    return RankedList(query_id=query_id, descriptor=descriptor, hits=hits)


def _default_query_id(query_text: str) -> str:
    return "q-" + hashlib.sha1(query_text.encode("utf-8")).hexdigest()[:12]


class Retriever:
    """A strategy closed over one snapshot; construction via make_retriever."""

    def __init__(
        self,
        rtype: str,
        snapshot: IndexSnapshot,
        top_k: int,
        weights: FusionWeights,
        provider: EmbeddingProvider,
    ):
        self.rtype = rtype
        self.snapshot = snapshot
        self.top_k = top_k
        self.weights = weights
        self.provider = provider

    def descriptor(self) -> dict:
        desc: dict = {"type": self.rtype, "top_k": self.top_k}
        if self.rtype == "hybrid":
            desc["weights"] = {"bm25": self.weights.w_bm25, "vector": self.weights.w_vector}
        return desc

    def retrieve(self, query_text: str, k: int | None = None, query_id: str | None = None) -> RankedList:
        """Top-k chunks for the query; deterministic given (snapshot, query, config)."""
        k = self.top_k if k is None else k
        if k < 1:
            raise RetrievalError(f"k must be >= 1, got {k}")
        if self.snapshot.N == 0:
            raise RetrievalError("snapshot is empty")
        query_id = query_id if query_id is not None else _default_query_id(query_text)

        if self.rtype == "bm25":
            hits = bm25_search(self.snapshot, analyze(query_text), k)
            ranked = tuple(
                RankedHit(chunk_id=h.chunk_id, score=h.raw_score, rank=h.rank, bm25_raw=h.raw_score)
                for h in hits
            )
            return RankedList(query_id=query_id, descriptor=self.descriptor(), hits=ranked)

        if self.rtype in ("vector", "auto_merging"):
            qvec = self.provider.embed_batch([query_text])[0]
            hits = vector_search(self.snapshot, qvec, k)
            ranked = tuple(
                RankedHit(chunk_id=h.chunk_id, score=h.raw_score, rank=h.rank, vector_raw=h.raw_score)
                for h in hits
            )
            return RankedList(query_id=query_id, descriptor=self.descriptor(), hits=ranked)

        # hybrid: each source retrieves its own top-k pool before fusion
        bm25_hits = bm25_search(self.snapshot, analyze(query_text), k)
        qvec = self.provider.embed_batch([query_text])[0]
        vector_hits = vector_search(self.snapshot, qvec, k)
        fused = fuse(bm25_hits, vector_hits, self.weights, k, query_id=query_id)
        return RankedList(query_id=query_id, descriptor=self.descriptor(), hits=fused.hits)


def make_retriever(cfg: RetrieverConfig, snapshot: IndexSnapshot) -> Retriever:
    """Instantiate the configured strategy over a snapshot."""
    if cfg.type not in RETRIEVER_TYPES:
        raise RetrievalError(
            f"unknown retriever type '{cfg.type}': expected one of {RETRIEVER_TYPES}"
        )
    return Retriever(
        rtype=cfg.type,
        snapshot=snapshot,
        top_k=cfg.top_k,
        weights=FusionWeights(w_bm25=cfg.w_bm25, w_vector=cfg.w_vector),
        provider=reconstruct_provider(snapshot),
    )
