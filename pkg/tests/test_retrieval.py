"""Exact top-k retrieval: tie rule, prefix property, cache integration."""

import numpy as np
import pytest

from iclkit import (
    Dataset,
    EmbeddingCache,
    EmbeddingError,
    Example,
    HashingEmbedder,
    Index,
    LabelSpace,
    RetrievalError,
    embed_corpus,
    index_build,
)


def make_index(vectors, ids=None, labels=None):
    n = len(vectors)
    ids = ids or [f"e{i}" for i in range(n)]
    labels = labels or ["L"] * n
    texts = [f"text {i}" for i in range(n)]
    return Index(ids=ids, vectors=np.asarray(vectors, dtype=np.float64), labels=labels, texts=texts)


class TestIndexConstruction:
    def test_rejects_zero_vectors(self):
        with pytest.raises(RetrievalError, match="zero vectors"):
            make_index([[1.0, 0.0], [0.0, 0.0]])

    def test_rejects_mismatched_parallel_lists(self):
        with pytest.raises(RetrievalError, match="parallel"):
            Index(ids=["a"], vectors=np.ones((2, 2)), labels=["L", "L"], texts=["t", "t"])

    def test_rejects_non_matrix(self):
        with pytest.raises(RetrievalError, match="2-d"):
            Index(ids=["a"], vectors=np.ones(3), labels=["L"], texts=["t"])


class TestTopk:
    def test_orders_by_descending_similarity(self):
        index = make_index([[1.0, 0.0], [0.7, 0.7], [0.0, 1.0]])
        ns = index.topk("q", np.array([1.0, 0.1]), 3)
        assert [n.example_id for n in ns.neighbors] == ["e0", "e1", "e2"]
        sims = [n.similarity for n in ns.neighbors]
        assert sims == sorted(sims, reverse=True)

    def test_equal_similarity_breaks_ties_by_ascending_id(self):
        # identical vectors under different ids, inserted in reverse id order
        index = make_index([[1.0, 0.0]] * 3 + [[0.0, 1.0]], ids=["c", "b", "a", "z"])
        ns = index.topk("q", np.array([1.0, 0.0]), 3)
        assert [n.example_id for n in ns.neighbors] == ["a", "b", "c"]

    def test_k_larger_than_index_returns_everything(self):
        index = make_index([[1.0, 0.0], [0.0, 1.0]])
        ns = index.topk("q", np.array([1.0, 1.0]), 50)
        assert len(ns.neighbors) == 2
        assert ns.k == 50

    def test_prefix_property_and_determinism(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            n = int(rng.integers(5, 60))
            vectors = rng.normal(size=(n, 6))
            index = make_index(vectors)
            q = rng.normal(size=6)
            full = index.topk("q", q, n)
            again = index.topk("q", q, n)
            assert [x.example_id for x in again.neighbors] == [x.example_id for x in full.neighbors]
            assert [x.similarity for x in again.neighbors] == [x.similarity for x in full.neighbors]
            for k in (1, 3, 7):
                if k <= n:
                    prefix = index.topk("q", q, k)
                    assert prefix.neighbors == full.neighbors[:k]

    def test_similarities_are_clipped_to_unit_range(self):
        index = make_index([[1.0, 0.0]])
        ns = index.topk("q", np.array([1.0, 0.0]), 1)
        assert ns.neighbors[0].similarity == 1.0

    def test_zero_query_rejected(self):
        index = make_index([[1.0, 0.0]])
        with pytest.raises(EmbeddingError, match="zero vector"):
            index.topk("q", np.zeros(2), 1)

    def test_dims_mismatch_rejected(self):
        index = make_index([[1.0, 0.0]])
        with pytest.raises(RetrievalError, match="dims"):
            index.topk("q", np.ones(3), 1)

    def test_k_must_be_positive(self):
        index = make_index([[1.0, 0.0]])
        with pytest.raises(RetrievalError, match="k must be"):
            index.topk("q", np.ones(2), 0)

    def test_neighbors_carry_labels_and_texts(self):
        index = Index(
            ids=["a", "b"],
            vectors=np.array([[1.0, 0.0], [0.0, 1.0]]),
            labels=["X", "Y"],
            texts=["alpha", "beta"],
        )
        ns = index.topk("q", np.array([0.1, 1.0]), 2)
        assert (ns.neighbors[0].label, ns.neighbors[0].text) == ("Y", "beta")


class TestNeighborSetDigest:
    def test_digest_tracks_ids_and_similarities(self):
        index = make_index([[1.0, 0.0], [0.2, 0.9]])
        a = index.topk("q", np.array([1.0, 0.2]), 2)
        b = index.topk("q", np.array([1.0, 0.2]), 2)
        assert a.digest() == b.digest()
        c = index.topk("q", np.array([0.9, 0.3]), 2)
        assert a.digest() != c.digest()

    def test_labels_helper(self):
        index = make_index([[1.0, 0.0], [0.0, 1.0]], labels=["X", "Y"])
        ns = index.topk("q", np.array([1.0, 0.5]), 2)
        assert ns.labels() == ["X", "Y"]


class TestIndexBuild:
    def make_dataset(self):
        train = tuple(Example(f"tr{i}", f"token{i} filler", "X") for i in range(4))
        test = (Example("te0", "token0 query", "X"),)
        return Dataset(name="d", train=train, test=test, label_space=LabelSpace(("X", "Y")))

    def test_builds_from_complete_cache(self, tmp_path):
        ds = self.make_dataset()
        emb = HashingEmbedder(dims=32)
        cache = embed_corpus(emb, ds, tmp_path / "c.vec")
        index = index_build(cache, ds)
        assert len(index) == 4
        ns = index.topk("te0", cache.get("te0"), 2)
        assert len(ns.neighbors) == 2
        # train ids only; the query never retrieves itself
        assert all(n.example_id.startswith("tr") for n in ns.neighbors)

    def test_missing_cache_entries_rejected(self, tmp_path):
        ds = self.make_dataset()
        emb = HashingEmbedder(dims=32)
        cache = EmbeddingCache.open(tmp_path / "c.vec", emb.provider_id, 32)
        cache.append_batch([("tr0", emb.embed_one(ds.train[0].text))])
        with pytest.raises(RetrievalError, match="cache missing 3 train entries"):
            index_build(cache, ds)
