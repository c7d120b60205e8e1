"""Sentence embedding providers, cosine similarity, and the on-disk vector cache.

Embeddings come from a pluggable provider: a deterministic token-hashing mock
for offline runs, or a remote HTTP service. The cache persists one vector per
example so retrieval never re-embeds.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import Dataset

CACHE_MAGIC = b"ICLVEC1\n"

DEFAULT_BATCH_SIZE = 32
DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_WORKERS = 4


class EmbeddingError(RuntimeError):
    """Fatal embedding contract violation (wrong dims, bad cache, zero vector)."""


class TransportError(RuntimeError):
    """Retryable transport failure; carries the attempt count."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class EmbeddingProvider(Protocol):
    provider_id: str
    dims: int

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class HashingEmbedder:
    """Deterministic offline provider: seeded token hashing into `dims` buckets.

    Each whitespace token is hashed into one of `dims` buckets, bucket counts
    are accumulated, and the count vector is L2-normalized. A pure function of
    (text, dims, seed), so identical texts always embed identically and texts
    sharing tokens land near each other.
    """

    def __init__(self, dims: int = 64, seed: int = 0):
        if dims < 1:
            raise ValueError(f"dims must be positive, got {dims}")
        self.dims = dims
        self.seed = seed
        self.provider_id = f"hash-d{dims}-s{seed}"
        self.calls = 0  # batch calls, instrumentable by tests

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % self.dims

    def embed_one(self, text: str) -> np.ndarray:
        if not text:
            raise EmbeddingError("cannot embed empty text")
        vec = np.zeros(self.dims, dtype=np.float64)
        for token in text.split():
            vec[self._bucket(token)] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EmbeddingError("text produced no tokens")
        return vec / norm

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        self.calls += 1
        return [self.embed_one(t) for t in texts]


class RemoteEmbeddingProvider:
    """HTTP provider: POST {"texts": [...]} -> {"vectors": [[...]]}.

    Retries transport failures with exponential backoff plus jitter, up to
    `max_attempts`. A wrong-dims response is a fatal contract error, never
    retried.
    """

    def __init__(
        self,
        url: str,
        dims: int,
        provider_id: str,
        auth_token: str | None = None,
        timeout: float = 30.0,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base: float = 0.5,
        session=None,
        sleep=time.sleep,
    ):
        if session is None:
            import requests

            session = requests.Session()
        self.url = url
        self.dims = dims
        self.provider_id = provider_id
        self.auth_token = auth_token
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.session = session
        self.sleep = sleep

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        rng = random.Random(0x5EED ^ len(texts))
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self.session.post(
                    self.url, json={"texts": list(texts)}, headers=headers, timeout=self.timeout
                )
                status = getattr(resp, "status_code", 200)
                if status >= 500:
                    raise ConnectionError(f"server returned {status}")
                if status >= 400:
                    raise EmbeddingError(f"embedding endpoint rejected request: {status}")
                payload = resp.json()
                vectors = payload["vectors"]
            except EmbeddingError:
                raise
            except Exception as e:  # transport-level: retry with backoff
                last_error = e
                if attempt < self.max_attempts:
                    self.sleep(self.backoff_base * (2 ** (attempt - 1)) * (1 + rng.random()))
                continue
            if len(vectors) != len(texts):
                raise EmbeddingError(
                    f"provider returned {len(vectors)} vectors for {len(texts)} texts"
                )
            out = []
            for vec in vectors:
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (self.dims,):
                    raise EmbeddingError(
                        f"provider returned dims {arr.shape} but declared {self.dims}"
                    )
                out.append(arr)
            return out
        raise TransportError(
            f"embedding endpoint unreachable after {self.max_attempts} attempts: {last_error}",
            attempts=self.max_attempts,
        )


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    """Embed one text through the provider, checking the declared dims."""
    if not text:
        raise EmbeddingError("cannot embed empty text")
    (vec,) = provider.embed_batch([text])
    if vec.shape != (provider.dims,):
        raise EmbeddingError(f"provider returned {vec.shape}, declared dims {provider.dims}")
    return vec


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a,b) / (|a|*|b|), clamped into [-1, 1] against float overshoot."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dims mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine similarity undefined for zero vectors")
    return float(np.clip(float(np.dot(a, b)) / (na * nb), -1.0, 1.0))


@dataclass
class EmbeddingCache:
    """Vector store for one (dataset, provider) pairing.

    File layout: magic, one JSON header line {"version", "provider_id",
    "dims"}, then length-prefixed records of (example_id utf-8, float32
    little-endian vector). An incomplete trailing record (interrupted write)
    is dropped on load, which is what makes embed_corpus resumable.
    """

    path: Path
    provider_id: str
    dims: int
    vectors: dict[str, np.ndarray]

    @classmethod
    def open(cls, path: str | Path, provider_id: str, dims: int) -> "EmbeddingCache":
        p = Path(path)
        if p.exists():
            cache = cls.load(p)
            if cache.provider_id != provider_id or cache.dims != dims:
                raise EmbeddingError(
                    f"cache {p} belongs to provider {cache.provider_id!r} (dims {cache.dims}), "
                    f"requested {provider_id!r} (dims {dims})"
                )
            return cache
        p.parent.mkdir(parents=True, exist_ok=True)
        header = json.dumps({"version": 1, "provider_id": provider_id, "dims": dims})
        with p.open("wb") as f:
            f.write(CACHE_MAGIC)
            f.write(header.encode("utf-8") + b"\n")
        return cls(path=p, provider_id=provider_id, dims=dims, vectors={})

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingCache":
        p = Path(path)
        raw = p.read_bytes()
        if not raw.startswith(CACHE_MAGIC):
            raise EmbeddingError(f"{p} is not an embedding cache (bad magic)")
        body = raw[len(CACHE_MAGIC):]
        newline = body.index(b"\n")
        header = json.loads(body[:newline].decode("utf-8"))
        if header.get("version") != 1:
            raise EmbeddingError(f"{p}: unsupported cache version {header.get('version')}")
        dims = int(header["dims"])
        vectors: dict[str, np.ndarray] = {}
        buf = body[newline + 1:]
        offset = 0
        record_bytes = 4  # id length prefix
        while offset + record_bytes <= len(buf):
            (id_len,) = struct.unpack_from("<I", buf, offset)
            total = 4 + id_len + 4 * dims
            if offset + total > len(buf):
                break  # torn tail record: ignore, will be re-embedded
            ex_id = buf[offset + 4 : offset + 4 + id_len].decode("utf-8")
            vec = np.frombuffer(
                buf, dtype="<f4", count=dims, offset=offset + 4 + id_len
            ).astype(np.float64)
            vectors[ex_id] = vec
            offset += total
        return cls(path=p, provider_id=str(header["provider_id"]), dims=dims, vectors=vectors)

    def __contains__(self, example_id: str) -> bool:
        return example_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, example_id: str) -> np.ndarray:
        return self.vectors[example_id]

    def append_batch(self, entries: Sequence[tuple[str, np.ndarray]]) -> None:
        """Append entries and flush; a batch is durable once this returns."""
        with self.path.open("ab") as f:
            for ex_id, vec in entries:
                if vec.shape != (self.dims,):
                    raise EmbeddingError(
                        f"vector for {ex_id!r} has shape {vec.shape}, cache dims {self.dims}"
                    )
                id_bytes = ex_id.encode("utf-8")
                f.write(struct.pack("<I", len(id_bytes)))
                f.write(id_bytes)
                f.write(np.asarray(vec, dtype="<f4").tobytes())
            f.flush()
        for ex_id, vec in entries:
            self.vectors[ex_id] = np.asarray(vec, dtype="<f4").astype(np.float64)


def embed_corpus(
    provider: EmbeddingProvider,
    dataset: Dataset,
    cache_path: str | Path,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = DEFAULT_WORKERS,
) -> EmbeddingCache:
    """Embed every train and test example into the cache; idempotent.

    Only missing entries are embedded; a rerun over a complete cache makes no
    provider calls. Provider calls fan out over a bounded worker pool and the
    results are merged back in example order through a single writer.
    """
    cache = EmbeddingCache.open(cache_path, provider.provider_id, provider.dims)
    pending = [ex for ex in dataset.train + dataset.test if ex.id not in cache]
    if not pending:
        return cache
    batches = [pending[i : i + batch_size] for i in range(0, len(pending), batch_size)]

    def run(batch):
        return provider.embed_batch([ex.text for ex in batch])

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for batch, vectors in zip(batches, pool.map(run, batches)):
            cache.append_batch([(ex.id, vec) for ex, vec in zip(batch, vectors)])
    return cache
