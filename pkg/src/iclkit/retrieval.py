"""Exact top-k retrieval over cached train embeddings.

The NeighborSet returned here is the shared evidence for every predictor:
kNN, LR-on-top-k, and the LLM prompt all consume the same neighbors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .corpus import Dataset
from .embedding import EmbeddingCache, EmbeddingError


class RetrievalError(RuntimeError):
    """Fatal retrieval precondition failure (missing cache entries, dims mismatch)."""


@dataclass(frozen=True)
class Neighbor:
    example_id: str
    similarity: float
    label: str
    text: str


@dataclass(frozen=True)
class NeighborSet:
    """Top-k training neighbors of one query, sorted by descending similarity."""

    query_id: str
    k: int
    neighbors: tuple[Neighbor, ...]

    def labels(self) -> list[str]:
        return [n.label for n in self.neighbors]

    def digest(self) -> str:
        """Stable fingerprint of (ids, similarities); records carry it so the
        evidence-sharing invariant stays checkable."""
        payload = json.dumps(
            [[n.example_id, repr(n.similarity)] for n in self.neighbors]
        ).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


class Index:
    """Immutable exact-similarity index over train vectors.

    Queries do a full vectorized scan: cosine similarities against every
    stored (unit-normalized) vector, then a sort with the tie rule of
    descending similarity, ascending example id. No approximation, so results
    match an exhaustive per-pair oracle exactly.
    """

    def __init__(self, ids: list[str], vectors: np.ndarray, labels: list[str], texts: list[str]):
        if vectors.ndim != 2:
            raise RetrievalError(f"expected 2-d vector matrix, got shape {vectors.shape}")
        if not (len(ids) == vectors.shape[0] == len(labels) == len(texts)):
            raise RetrievalError("ids, vectors, labels, texts must be parallel")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0.0):
            bad = [ids[i] for i in np.flatnonzero(norms == 0.0)[:5]]
            raise RetrievalError(f"zero vectors in index: {bad}")
        self._ids = np.asarray(ids)
        self._matrix = vectors / norms[:, None]
        self._labels = list(labels)
        self._texts = list(texts)
        self.dims = vectors.shape[1]

    def __len__(self) -> int:
        return len(self._ids)

    def topk(self, query_id: str, query: np.ndarray, k: int) -> NeighborSet:
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dims,):
            raise RetrievalError(f"query dims {query.shape} do not match index dims {self.dims}")
        if k < 1:
            raise RetrievalError(f"k must be >= 1, got {k}")
        qnorm = float(np.linalg.norm(query))
        if qnorm == 0.0:
            raise EmbeddingError("cannot query with a zero vector")
        sims = np.clip(self._matrix @ (query / qnorm), -1.0, 1.0)
        order = np.lexsort((self._ids, -sims))[: min(k, len(self._ids))]
        neighbors = tuple(
            Neighbor(
                example_id=str(self._ids[i]),
                similarity=float(sims[i]),
                label=self._labels[i],
                text=self._texts[i],
            )
            for i in order
        )
        return NeighborSet(query_id=query_id, k=k, neighbors=neighbors)


def index_build(cache: EmbeddingCache, dataset: Dataset) -> Index:
    """Build the train-split index from a complete embedding cache."""
    missing = [ex.id for ex in dataset.train if ex.id not in cache]
    if missing:
        raise RetrievalError(
            f"cache missing {len(missing)} train entries, e.g. {missing[:5]}"
        )
    ids = [ex.id for ex in dataset.train]
    matrix = np.stack([cache.get(ex.id) for ex in dataset.train])
    return Index(
        ids=ids,
        vectors=matrix,
        labels=[ex.label for ex in dataset.train],
        texts=[ex.text for ex in dataset.train],
    )


def topk(index: Index, query_id: str, query: np.ndarray, k: int) -> NeighborSet:
    return index.topk(query_id, query, k)
