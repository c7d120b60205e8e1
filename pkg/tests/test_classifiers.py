"""kNN voting, TF-IDF, and the from-scratch logistic regression."""

import math
import random

import numpy as np
import pytest

from conftest import ns_of
from iclkit import (
    LabelSpace,
    LrHyper,
    knn_predict,
    logreg_train,
    lr_on_topk,
    tfidf_fit,
    tfidf_transform,
    tokenize,
)
from iclkit.classifiers import logreg_loss_grad


class TestKnnVote:
    def test_majority_wins_unweighted(self):
        ns = ns_of([("a", 0.9, "A"), ("b", 0.5, "B"), ("c", 0.5, "B")])
        pred = knn_predict(ns, weighted=False)
        assert pred.label == "B"
        assert pred.model == "knn"
        assert pred.score_by_label == {"A": 1.0, "B": 2.0}

    def test_weighted_vote_sums_similarities(self):
        # unweighted says B (2 votes); weighted says A (0.9 > 0.8)
        ns = ns_of([("a", 0.9, "A"), ("b", 0.4, "B"), ("c", 0.4, "B")])
        assert knn_predict(ns, weighted=False).label == "B"
        pred = knn_predict(ns, weighted=True)
        assert pred.label == "A"
        assert pred.model == "wknn"
        assert pred.score_by_label == {"A": 0.9, "B": pytest.approx(0.8)}

    def test_count_tie_broken_by_cumulative_similarity(self):
        ns = ns_of([("a", 0.6, "B"), ("b", 0.9, "A")])
        assert knn_predict(ns, weighted=False).label == "A"

    def test_full_tie_broken_by_smallest_label(self):
        ns = ns_of([("a", 0.7, "B"), ("b", 0.7, "A")])
        assert knn_predict(ns, weighted=False).label == "A"
        assert knn_predict(ns, weighted=True).label == "A"

    def test_single_neighbor(self):
        ns = ns_of([("a", 0.2, "Z")])
        assert knn_predict(ns, weighted=False).label == "Z"
        assert knn_predict(ns, weighted=True).label == "Z"

    def test_empty_neighbor_set_rejected(self):
        with pytest.raises(ValueError, match="empty NeighborSet"):
            knn_predict(ns_of([]), weighted=False)

    def test_label_permutation_equivariance(self):
        """Relabeling neighbors permutes the prediction the same way, whenever
        the vote has a unique winner before the lexicographic fallback."""
        rng = random.Random(4)
        mapping = {"A": "B", "B": "C", "C": "A"}
        checked = 0
        while checked < 300:
            items = [
                (f"n{i}", round(rng.uniform(0.05, 1.0), 6), rng.choice("ABC"))
                for i in range(rng.randint(1, 9))
            ]
            for weighted in (False, True):
                score: dict[str, float] = {}
                cum: dict[str, float] = {}
                for _, sim, lab in items:
                    score[lab] = score.get(lab, 0.0) + (sim if weighted else 1.0)
                    cum[lab] = cum.get(lab, 0.0) + sim
                ranked = sorted(score, key=lambda l: (-score[l], -cum[l]))
                if len(ranked) > 1 and (score[ranked[0]], cum[ranked[0]]) == (
                    score[ranked[1]],
                    cum[ranked[1]],
                ):
                    continue  # winner depends on label order; permutation may flip it
                base = knn_predict(ns_of(items), weighted=weighted)
                mapped = knn_predict(
                    ns_of([(i, s, mapping[l]) for i, s, l in items]), weighted=weighted
                )
                assert mapped.label == mapping[base.label]
                checked += 1


class TestTokenize:
    def test_lowercases_and_splits_on_non_alphanumeric(self):
        assert tokenize("Hello, World! x2") == ["hello", "world", "x2"]

    def test_empty_and_symbol_only(self):
        assert tokenize("") == []
        assert tokenize("!!! ---") == []


class TestTfidf:
    def test_idf_values_match_hand_computation(self):
        model = tfidf_fit(["a b", "a c"])
        assert model.vocabulary == {"a": 0, "b": 1, "c": 2}
        assert model.idf[0] == pytest.approx(math.log(3 / 3) + 1, abs=1e-12)
        assert model.idf[1] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)
        assert model.idf[2] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)

    def test_transform_is_unit_normalized_count_times_idf(self):
        model = tfidf_fit(["a b", "a c"])
        idf_b = math.log(3 / 2) + 1
        raw = np.array([1.0, idf_b, 0.0])
        expected = raw / np.linalg.norm(raw)
        assert np.allclose(tfidf_transform(model, "a b"), expected, atol=1e-12)

    def test_repeated_tokens_raise_term_frequency(self):
        model = tfidf_fit(["a b", "a c"])
        vec = tfidf_transform(model, "b b b a")
        assert vec[1] > vec[0]

    def test_out_of_vocabulary_text_maps_to_zero(self):
        model = tfidf_fit(["a b", "a c"])
        assert np.array_equal(tfidf_transform(model, "zzz qqq"), np.zeros(3))

    def test_fit_rejects_empty_input(self):
        with pytest.raises(ValueError, match="at least one text"):
            tfidf_fit([])
        with pytest.raises(ValueError, match="empty after tokenization"):
            tfidf_fit(["!!!", "---"])


class TestLogReg:
    def test_separable_two_class(self):
        features = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.1], [0.1, 1.0]])
        labels = ["X", "Y", "X", "Y"]
        model = logreg_train(features, labels, hyper=LrHyper(l2=0.01))
        assert model.predict(np.array([1.0, 0.0])) == "X"
        assert model.predict(np.array([0.0, 1.0])) == "Y"

    def test_training_is_deterministic(self):
        rng = np.random.default_rng(5)
        features = rng.normal(size=(12, 4))
        labels = [("P" if x[0] + x[1] > 0 else "Q") for x in features]
        a = logreg_train(features, labels)
        b = logreg_train(features, labels)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(6)
        features = rng.normal(size=(9, 3))
        labels = [rng.choice(["A", "B", "C"]) for _ in range(9)]
        if len(set(labels)) < 2:
            labels[0] = "A" if labels[1] != "A" else "B"
        model = logreg_train(features, labels)
        proba = model.predict_proba(rng.normal(size=3))
        assert proba.shape == (len(model.labels),)
        assert float(proba.sum()) == pytest.approx(1.0, abs=1e-12)

    def test_label_space_fixes_row_order_and_covers_unseen(self):
        ls = LabelSpace(("Z", "A", "M"))
        features = np.array([[1.0], [-1.0]])
        model = logreg_train(features, ["A", "Z"], label_space=ls)
        assert model.labels == ("Z", "A", "M")
        assert model.classes_seen == frozenset({"A", "Z"})
        assert model.predict_proba(np.array([1.0])).shape == (3,)

    def test_single_class_degenerates_to_constant(self):
        model = logreg_train(np.array([[1.0], [2.0]]), ["X", "X"], label_space=LabelSpace(("X", "Y")))
        assert model.classes_seen == frozenset({"X"})
        assert model.predict(np.array([123.0])) == "X"
        assert model.predict(np.array([-123.0])) == "X"

    def test_feature_label_mismatch_rejected(self):
        with pytest.raises(ValueError, match="do not align"):
            logreg_train(np.ones((3, 2)), ["A", "B"])

    def test_gradient_matches_finite_differences_spot_check(self):
        rng = np.random.default_rng(7)
        features = rng.normal(size=(6, 3))
        targets = np.zeros((6, 2))
        for i in range(6):
            targets[i, i % 2] = 1.0
        weights = rng.normal(size=(2, 3))
        bias = rng.normal(size=2)
        _, grad_w, grad_b = logreg_loss_grad(weights, bias, features, targets, l2=0.7)
        h = 1e-6
        for i in range(2):
            for j in range(3):
                bump = np.zeros_like(weights)
                bump[i, j] = h
                up, _, _ = logreg_loss_grad(weights + bump, bias, features, targets, 0.7)
                down, _, _ = logreg_loss_grad(weights - bump, bias, features, targets, 0.7)
                assert grad_w[i, j] == pytest.approx((up - down) / (2 * h), rel=1e-6, abs=1e-9)

    def test_bias_is_not_regularized(self):
        # pure-bias gradient must not move with l2
        features = np.zeros((4, 2))
        targets = np.array([[1.0, 0.0]] * 4)
        bias = np.array([0.3, -0.3])
        _, _, grad_b_low = logreg_loss_grad(np.zeros((2, 2)), bias, features, targets, 0.0)
        _, _, grad_b_high = logreg_loss_grad(np.zeros((2, 2)), bias, features, targets, 10.0)
        assert np.array_equal(grad_b_low, grad_b_high)


class TestLrOnTopk:
    def test_single_neighbor_short_circuits(self):
        pred = lr_on_topk(ns_of([("a", 0.9, "A", "alpha text")]), "query")
        assert pred.label == "A"
        assert pred.model == "lr"

    def test_unanimous_neighborhood_short_circuits(self):
        ns = ns_of([("a", 0.9, "A", "x y"), ("b", 0.8, "A", "x z")])
        assert lr_on_topk(ns, "query").label == "A"

    def test_mixed_neighborhood_trains_on_neighbor_texts(self):
        ns = ns_of(
            [
                ("a", 0.9, "X", "xray xray xray"),
                ("b", 0.8, "X", "xray xray zulu"),
                ("c", 0.7, "Y", "yankee yankee yankee"),
                ("d", 0.6, "Y", "yankee yankee zulu"),
            ]
        )
        assert lr_on_topk(ns, "xray xray").label == "X"
        assert lr_on_topk(ns, "yankee zulu yankee").label == "Y"

    def test_scores_cover_the_label_rows(self):
        ns = ns_of([("a", 0.9, "X", "xray"), ("b", 0.7, "Y", "yankee")])
        pred = lr_on_topk(ns, "xray", label_space=LabelSpace(("X", "Y", "Z")))
        assert set(pred.score_by_label) == {"X", "Y", "Z"}
        assert sum(pred.score_by_label.values()) == pytest.approx(1.0, abs=1e-9)

    def test_all_oov_query_falls_back_to_bias(self):
        ns = ns_of(
            [
                ("a", 0.9, "X", "xray xray"),
                ("b", 0.8, "X", "xray zulu"),
                ("c", 0.7, "Y", "yankee"),
            ]
        )
        pred = lr_on_topk(ns, "unrelated words entirely")
        assert pred.label in ("X", "Y")

    def test_empty_neighbor_set_rejected(self):
        with pytest.raises(ValueError, match="empty NeighborSet"):
            lr_on_topk(ns_of([]), "query")
