"""Immutable snapshot of a chunk corpus: BM25 inverted index + dense vectors.

Chunks are canonicalized by ascending chunk_id before indexing, so the
snapshot id and all search results are insertion-order independent. BM25 is
Okapi with k1=1.2, b=0.75 and the non-negative idf
ln((N - df + 0.5) / (df + 0.5) + 1). Vector search is an exhaustive scan:
exact, deterministic, and fast enough at desk scale.

On disk a snapshot is a directory of manifest.json, chunks.jsonl,
lengths.json, vectors.f32le (row-major little-endian float32),
postings.bin (varint-coded postings, format below), and checksums.txt
(SHA-256 per file). Loading verifies checksums and the manifest.

postings.bin layout (all unsigned LEB128 varints, terms sorted):
    num_terms
    per term: byte_len, term_utf8, num_postings, then per posting
    (ordinal_delta, tf) with ordinal deltas relative to the previous
    posting's ordinal (first delta is the ordinal itself).
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import string
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .embedding import EmbeddingProvider, EmbeddingVector, provider_from_descriptor
from .ingestion import Chunk

BM25_K1 = 1.2
BM25_B = 0.75

_STRIP_CHARS = string.punctuation + "“”‘’–—…"

MANIFEST_FILE = "manifest.json"
CHUNKS_FILE = "chunks.jsonl"
LENGTHS_FILE = "lengths.json"
VECTORS_FILE = "vectors.f32le"
POSTINGS_FILE = "postings.bin"
CHECKSUMS_FILE = "checksums.txt"
_DATA_FILES = (MANIFEST_FILE, CHUNKS_FILE, LENGTHS_FILE, VECTORS_FILE, POSTINGS_FILE)


class SnapshotError(ValueError):
    pass


class ChecksumError(SnapshotError):
    pass


class ManifestMismatchError(SnapshotError):
    pass


@dataclass(frozen=True)
class ScoredHit:
    chunk_id: str
    raw_score: float
    rank: int  # 1-based


def analyze(text: str) -> list[str]:
    """Index analyzer: lowercase, whitespace split, strip edge punctuation."""
    terms = []
    for token in text.lower().split():
        term = token.strip(_STRIP_CHARS)
        if term:
            terms.append(term)
    return terms


class IndexSnapshot:
    """Built once, then read-only; safe to share across threads."""

    def __init__(
        self,
        chunks: list[Chunk],
        vectors: np.ndarray,
        inverted_index: dict[str, list[tuple[int, int]]],
        doc_lengths: list[int],
        manifest: dict,
    ):
        self.chunks = list(chunks)
        self.vectors = vectors  # float32, shape (N, dim)
        self.inverted_index = inverted_index
        self.doc_lengths = list(doc_lengths)
        self.N = len(chunks)
        self.avgdl = (sum(doc_lengths) / self.N) if self.N else 0.0
        self.manifest = dict(manifest)
        self.snapshot_id = manifest["snapshot_id"]
        self._ordinal_by_id = {c.chunk_id: i for i, c in enumerate(self.chunks)}
        # float64 row-normalized copy: exact unit rows for cosine scoring
        v64 = vectors.astype(np.float64)
        norms = np.linalg.norm(v64, axis=1)
        norms[norms == 0.0] = 1.0
        self._unit64 = v64 / norms[:, None]

    @property
    def dim(self) -> int:
        return int(self.manifest["dim"])

    def chunk_by_id(self, chunk_id: str) -> Chunk:
        return self.chunks[self._ordinal_by_id[chunk_id]]

    def has_chunk(self, chunk_id: str) -> bool:
        return chunk_id in self._ordinal_by_id


def _snapshot_id(chunks: list[Chunk], provider_desc: dict) -> str:
    hasher = hashlib.sha256()
    for chunk in chunks:
        hasher.update(chunk.chunk_id.encode("utf-8"))
        hasher.update(b"\x00")
        hasher.update(chunk.text.encode("utf-8"))
        hasher.update(b"\x01")
    hasher.update(json.dumps(provider_desc, sort_keys=True).encode("utf-8"))
    return hasher.hexdigest()[:16]


def build_snapshot(
    chunks: list[Chunk],
    provider: EmbeddingProvider,
    chunk_params: dict | None = None,
    created_at: str | None = None,
) -> IndexSnapshot:
    """Embed and index a chunk set; canonical order is ascending chunk_id."""
    if not chunks:
        raise SnapshotError("cannot build a snapshot from an empty chunk list")
    ordered = sorted(chunks, key=lambda c: c.chunk_id)
    ids = [c.chunk_id for c in ordered]
    for a, b in zip(ids, ids[1:]):
        if a == b:
            raise SnapshotError(f"duplicate chunk_id '{a}'")

    embedded = provider.embed_batch([c.text for c in ordered])
    desc = provider.descriptor()
    dim = int(desc["dim"])
    vectors = np.zeros((len(ordered), dim), dtype=np.float32)
    for i, vec in enumerate(embedded):
        if vec.dim != dim:
            raise SnapshotError(f"embedding dim {vec.dim} != provider dim {dim}")
        vectors[i] = np.asarray(vec.values, dtype=np.float32)

    inverted: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    for ordinal, chunk in enumerate(ordered):
        terms = analyze(chunk.text)
        doc_lengths.append(len(terms))
        counts: dict[str, int] = {}
        for term in terms:
            counts[term] = counts.get(term, 0) + 1
        for term, tf in counts.items():
            inverted.setdefault(term, []).append((ordinal, tf))
    for postings in inverted.values():
        postings.sort(key=lambda p: p[0])

    manifest = {
        "snapshot_id": _snapshot_id(ordered, desc),
        "n": len(ordered),
        "dim": dim,
        "provider": desc,
        "chunk_params": chunk_params,
        "created_at": created_at
        or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    return IndexSnapshot(ordered, vectors, inverted, doc_lengths, manifest)


def idf(n_docs: int, df: int) -> float:
    return math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)


def bm25_search(s: IndexSnapshot, query_terms: list[str], k: int) -> list[ScoredHit]:
    """Okapi BM25 over the inverted index; zero-score chunks are excluded.

    Terms are matched as given (callers analyze query text with the same
    analyzer as the index). Each occurrence in query_terms contributes.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    for term in query_terms:
        postings = s.inverted_index.get(term)
        if not postings:
            continue
        term_idf = idf(s.N, len(postings))
        for ordinal, tf in postings:
            length_norm = 1.0 - BM25_B + BM25_B * s.doc_lengths[ordinal] / s.avgdl
            contribution = term_idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * length_norm)
            scores[ordinal] = scores.get(ordinal, 0.0) + contribution
    scored = [
        (score, s.chunks[ordinal].chunk_id)
        for ordinal, score in scores.items()
        if score > 0.0
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [
        ScoredHit(chunk_id=cid, raw_score=score, rank=i + 1)
        for i, (score, cid) in enumerate(scored[:k])
    ]


def vector_search(s: IndexSnapshot, qvec: EmbeddingVector, k: int) -> list[ScoredHit]:
    """Exhaustive cosine scan; ties broken by ascending chunk_id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if qvec.dim != s.dim:
        raise SnapshotError(f"query dim {qvec.dim} != snapshot dim {s.dim}")
    q = np.asarray(qvec.values, dtype=np.float64)
    qnorm = np.linalg.norm(q)
    if qnorm > 0.0:
        q = q / qnorm
    scores = s._unit64 @ q
    scored = [(float(scores[i]), s.chunks[i].chunk_id) for i in range(s.N)]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [
        ScoredHit(chunk_id=cid, raw_score=score, rank=i + 1)
        for i, (score, cid) in enumerate(scored[:k])
    ]


# --- persistence -------------------------------------------------------------


def _write_varint(out: bytearray, value: int) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


class _VarintReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self) -> int:
        shift = 0
        result = 0
        while True:
            if self.pos >= len(self.data):
                raise ChecksumError("postings.bin truncated")
            byte = self.data[self.pos]
            self.pos += 1
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7

    def read_bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ChecksumError("postings.bin truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk


def _encode_postings(inverted: dict[str, list[tuple[int, int]]]) -> bytes:
    out = bytearray()
    terms = sorted(inverted)
    _write_varint(out, len(terms))
    for term in terms:
        raw = term.encode("utf-8")
        _write_varint(out, len(raw))
        out.extend(raw)
        postings = inverted[term]
        _write_varint(out, len(postings))
        prev = 0
        for ordinal, tf in postings:
            _write_varint(out, ordinal - prev)
            _write_varint(out, tf)
            prev = ordinal
    return bytes(out)


def _decode_postings(data: bytes) -> dict[str, list[tuple[int, int]]]:
    reader = _VarintReader(data)
    inverted: dict[str, list[tuple[int, int]]] = {}
    for _ in range(reader.read()):
        term = reader.read_bytes(reader.read()).decode("utf-8")
        count = reader.read()
        postings: list[tuple[int, int]] = []
        ordinal = 0
        for i in range(count):
            delta = reader.read()
            tf = reader.read()
            ordinal = delta if i == 0 else ordinal + delta
            postings.append((ordinal, tf))
        inverted[term] = postings
    return inverted


def _sha256_file(path: str) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            hasher.update(block)
    return hasher.hexdigest()


def persist(s: IndexSnapshot, directory: str) -> None:
    """Write the snapshot directory; load(persist(s)) reproduces s exactly."""
    os.makedirs(directory, exist_ok=True)

    def path(name: str) -> str:
        return os.path.join(directory, name)

    with open(path(MANIFEST_FILE), "w", encoding="utf-8") as fh:
        json.dump(s.manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(path(CHUNKS_FILE), "w", encoding="utf-8") as fh:
        for c in s.chunks:
            fh.write(
                json.dumps(
                    {
                        "chunk_id": c.chunk_id,
                        "doc_id": c.doc_id,
                        "text": c.text,
                        "token_count": c.token_count,
                        "char_span": list(c.char_span),
                        "seq": c.seq,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
    with open(path(LENGTHS_FILE), "w", encoding="utf-8") as fh:
        json.dump({"doc_lengths": s.doc_lengths}, fh)
        fh.write("\n")
    with open(path(VECTORS_FILE), "wb") as fh:
        fh.write(np.ascontiguousarray(s.vectors, dtype="<f4").tobytes())
    with open(path(POSTINGS_FILE), "wb") as fh:
        fh.write(_encode_postings(s.inverted_index))
    with open(path(CHECKSUMS_FILE), "w", encoding="utf-8") as fh:
        for name in _DATA_FILES:
            fh.write(f"{_sha256_file(path(name))}  {name}\n")


def load(
    directory: str,
    expected_provider: dict | None = None,
    expected_dim: int | None = None,
) -> IndexSnapshot:
    """Read a snapshot directory back, verifying checksums and the manifest."""

    def path(name: str) -> str:
        return os.path.join(directory, name)

    if not os.path.exists(path(CHECKSUMS_FILE)):
        raise SnapshotError(f"no snapshot at '{directory}' (missing {CHECKSUMS_FILE})")
    with open(path(CHECKSUMS_FILE), "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            digest, name = line.split(None, 1)
            if not os.path.exists(path(name)):
                raise ChecksumError(f"snapshot file '{name}' is missing")
            if _sha256_file(path(name)) != digest:
                raise ChecksumError(f"checksum mismatch for '{name}'")

    with open(path(MANIFEST_FILE), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if expected_dim is not None and int(manifest["dim"]) != expected_dim:
        raise ManifestMismatchError(
            f"snapshot dim {manifest['dim']} != expected {expected_dim}"
        )
    if expected_provider is not None and manifest["provider"] != expected_provider:
        raise ManifestMismatchError(
            f"snapshot provider {manifest['provider']} != expected {expected_provider}"
        )

    chunks: list[Chunk] = []
    with open(path(CHUNKS_FILE), "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            chunks.append(
                Chunk(
                    chunk_id=obj["chunk_id"],
                    doc_id=obj["doc_id"],
                    text=obj["text"],
                    token_count=obj["token_count"],
                    char_span=tuple(obj["char_span"]),
                    seq=obj["seq"],
                )
            )
    with open(path(LENGTHS_FILE), "r", encoding="utf-8") as fh:
        doc_lengths = json.load(fh)["doc_lengths"]
    n, dim = int(manifest["n"]), int(manifest["dim"])
    raw = np.fromfile(path(VECTORS_FILE), dtype="<f4")
    if raw.size != n * dim:
        raise ChecksumError(
            f"vectors.f32le holds {raw.size} floats, expected {n}x{dim}"
        )
    vectors = raw.reshape(n, dim)
    with open(path(POSTINGS_FILE), "rb") as fh:
        inverted = _decode_postings(fh.read())
    if len(chunks) != n or len(doc_lengths) != n:
        raise ChecksumError("chunk/length counts disagree with manifest")
    return IndexSnapshot(chunks, vectors, inverted, doc_lengths, manifest)


def reconstruct_provider(s: IndexSnapshot) -> EmbeddingProvider:
    return provider_from_descriptor(s.manifest["provider"])
