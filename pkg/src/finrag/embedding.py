"""Dense vectors for chunks and queries.

Two providers share one interface: a remote embeddings API client and a
deterministic local hashed-feature embedder for offline and test use. All
non-empty vectors are L2-normalized at embed time so similarity search is a
plain dot product; empty text maps to the zero vector.

The local embedder's hash is FNV-1a 64-bit (a repo constant): for each
whitespace token, hash the 8-byte little-endian seed followed by the
lowercased UTF-8 token, then add +1 or -1 (sign from bit 63) to component
``hash mod dim``.
"""
from __future__ import annotations

import logging
import math
import os
import threading
import time
from dataclasses import dataclass

import httpx

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_ATTEMPTS = 3
API_KEY_ENV = "FINRAG_EMBED_API_KEY"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmbeddingError(Exception):
    pass


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    norm: float

    @property
    def dim(self) -> int:
        return len(self.values)


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _normalized(values: list[float]) -> EmbeddingVector:
    norm = math.sqrt(sum(v * v for v in values))
    if norm == 0.0:
        return EmbeddingVector(values=tuple(values), norm=0.0)
    return EmbeddingVector(values=tuple(v / norm for v in values), norm=1.0)


def local_hash_embed(text: str, dim: int, seed: int = 0) -> EmbeddingVector:
    """Hashed bag-of-words embedding; reproducible across runs and platforms."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    acc = [0.0] * dim
    seed_bytes = (seed & _MASK64).to_bytes(8, "little")
    for token in text.split():
        h = fnv1a_64(seed_bytes + token.lower().encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        acc[h % dim] += sign
    return _normalized(acc)


class EmbeddingProvider:
    """Interface: embed a batch of texts, order-preserving."""

    kind = "base"

    def descriptor(self) -> dict:
        raise NotImplementedError

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        raise NotImplementedError


class LocalHashProvider(EmbeddingProvider):
    kind = "local_hash"

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed

    def descriptor(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "seed": self.seed}

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be a non-empty list")
        return [local_hash_embed(t, self.dim, self.seed) for t in texts]


class RemoteEmbeddingProvider(EmbeddingProvider):
    """Client for the de-facto embeddings REST shape.

    POST {base_url}/embeddings with {"model": ..., "input": [...]};
    vectors are read back from data[i].embedding in input order. Batches of
    64, bounded retry (3 attempts, exponential backoff) on 429/5xx and
    transport errors. Empty strings never reach the wire: they embed to the
    zero vector locally.
    """

    kind = "remote"

    def __init__(
        self,
        base_url: str,
        model: str,
        dim: int,
        max_input_chars: int = 32768,
        batch_size: int = DEFAULT_BATCH_SIZE,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base_s: float = 1.0,
        timeout_s: float = 60.0,
        max_in_flight: int = 4,
        api_key: str | None = None,
    ):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dim = dim
        self.max_input_chars = max_input_chars
        self.batch_size = batch_size
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.timeout_s = timeout_s
        self._semaphore = threading.Semaphore(max_in_flight)
        self._api_key = api_key

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "base_url": self.base_url,
            "model": self.model,
        }

    def _headers(self) -> dict[str, str]:
        key = self._api_key or os.environ.get(API_KEY_ENV)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post_batch(self, batch: list[str]) -> list[list[float]]:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                with self._semaphore:
                    resp = httpx.post(
                        f"{self.base_url}/embeddings",
                        json={"model": self.model, "input": batch},
                        headers=self._headers(),
                        timeout=self.timeout_s,
                    )
            except httpx.HTTPError as exc:
                last_error = EmbeddingError(f"transport error: {exc}")
                continue
            if resp.status_code in (401, 403):
                raise EmbeddingError(f"auth failure ({resp.status_code}): {resp.text}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = EmbeddingError(f"provider error {resp.status_code}: {resp.text}")
                continue
            if resp.status_code != 200:
                raise EmbeddingError(f"provider error {resp.status_code}: {resp.text}")
            try:
                data = resp.json()["data"]
                rows = [entry["embedding"] for entry in sorted(data, key=lambda e: e["index"])]
            except (ValueError, KeyError, TypeError) as exc:
                raise EmbeddingError(f"malformed embeddings response: {exc}") from exc
            if len(rows) != len(batch):
                raise EmbeddingError(
                    f"embeddings response count {len(rows)} != batch size {len(batch)}"
                )
            return rows
        raise last_error if last_error is not None else EmbeddingError("request failed")

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be a non-empty list")
        over = sum(1 for t in texts if len(t) > self.max_input_chars)
        if over:
            logger.warning("truncated %d over-length input(s) to %d chars", over, self.max_input_chars)
        prepared = [t[: self.max_input_chars] for t in texts]
        out: list[EmbeddingVector | None] = [None] * len(texts)
        pending: list[tuple[int, str]] = []
        for i, text in enumerate(prepared):
            if not text.strip():
                out[i] = EmbeddingVector(values=(0.0,) * self.dim, norm=0.0)
            else:
                pending.append((i, text))
        for start in range(0, len(pending), self.batch_size):
            batch = pending[start : start + self.batch_size]
            rows = self._post_batch([t for _, t in batch])
            for (i, _), row in zip(batch, rows):
                if len(row) != self.dim:
                    raise EmbeddingError(
                        f"embedding dim {len(row)} != configured dim {self.dim}"
                    )
                out[i] = _normalized([float(v) for v in row])
        return [v for v in out if v is not None]


def provider_from_descriptor(desc: dict) -> EmbeddingProvider:
    """Rebuild a provider from a snapshot manifest descriptor."""
    kind = desc.get("kind")
    if kind == "local_hash":
        return LocalHashProvider(dim=int(desc["dim"]), seed=int(desc.get("seed", 0)))
    if kind == "remote":
        return RemoteEmbeddingProvider(
            base_url=desc["base_url"], model=desc["model"], dim=int(desc["dim"])
        )
    raise ValueError(f"unknown embedding provider kind {kind!r}")


def make_provider(provider_id: str, dim: int, seed: int = 0) -> EmbeddingProvider:
    """Build a provider from config fields.

    ``local_hash`` is fully local; anything of the form ``remote:<base_url>``
    or ``remote:<base_url>#<model>`` targets the embeddings REST endpoint.
    """
    if provider_id == "local_hash":
        return LocalHashProvider(dim=dim, seed=seed)
    if provider_id.startswith("remote:"):
        rest = provider_id[len("remote:"):]
        base_url, _, model = rest.partition("#")
        return RemoteEmbeddingProvider(base_url=base_url, model=model or "default", dim=dim)
    raise ValueError(
        f"unknown embedding provider '{provider_id}' (expected 'local_hash' or 'remote:<url>#<model>')"
    )
