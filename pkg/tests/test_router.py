"""Relevance-gated dispatch between kNN and the LLM."""

import json

import pytest

from conftest import ns_of
from iclkit import (
    Example,
    LabelSpace,
    LlmClient,
    Prediction,
    QueryFailed,
    RelevanceScore,
    RouteDecision,
    RouterAuditLog,
    ScriptedChatBackend,
    proxy_relevance,
    route,
)
from iclkit.llm import majority_echo_script
from iclkit.router import PROXY_ANNOTATOR

LS = LabelSpace(("A", "B"))


def rel(score, query_id="q", k=2, annotator=PROXY_ANNOTATOR):
    return RelevanceScore(query_id=query_id, k=k, annotator=annotator, score=score)


def echo_client():
    return LlmClient(ScriptedChatBackend(majority_echo_script))


def sample_ns(query_id="q"):
    return ns_of([("e1", 0.9, "A", "alpha one"), ("e2", 0.8, "B", "beta two")], query_id=query_id)


class TestProxyRelevance:
    def test_mean_similarity(self):
        score = proxy_relevance(ns_of([("a", 0.8, "A"), ("b", 0.4, "B")]))
        assert score.score == pytest.approx(0.6)
        assert score.annotator == PROXY_ANNOTATOR

    def test_clamped_into_unit_interval(self):
        assert proxy_relevance(ns_of([("a", -0.5, "A"), ("b", -0.9, "B")])).score == 0.0

    def test_empty_neighbors_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            proxy_relevance(ns_of([]))


class TestRoute:
    def test_high_relevance_goes_to_knn(self):
        decision = route(
            Example("q", "text", "A"), sample_ns(), rel(0.9), 0.5, "unweighted", echo_client(), LS
        )
        assert decision.route == "knn"
        assert decision.prediction.model == "knn"
        # count tie between A and B breaks by cumulative similarity
        assert decision.prediction.label == "A"

    def test_weighted_mode_uses_weighted_vote(self):
        decision = route(
            Example("q", "text", "A"), sample_ns(), rel(0.9), 0.5, "weighted", echo_client(), LS
        )
        assert decision.prediction.model == "wknn"

    def test_threshold_boundary_is_inclusive(self):
        decision = route(
            Example("q", "text", "A"), sample_ns(), rel(0.5), 0.5, "unweighted", echo_client(), LS
        )
        assert decision.route == "knn"

    def test_low_relevance_goes_to_llm_with_plain_prompt(self):
        seen = []

        def spy(messages):
            seen.append(messages)
            return "B"

        client = LlmClient(ScriptedChatBackend(spy))
        decision = route(Example("q", "query text", "A"), sample_ns(), rel(0.2), 0.5, "unweighted", client, LS)
        assert decision.route == "llm"
        assert decision.prediction.model == "llm"
        assert decision.prediction.label == "B"
        contents = [m.content for m in seen[0]]
        assert any("alpha one" in c for c in contents)  # demonstrations still included
        assert "(similarity:" not in "".join(contents)
        assert contents[-1] == "query text"

    def test_llm_route_failure_propagates(self):
        client = LlmClient(ScriptedChatBackend(lambda m: "unparseable"))
        with pytest.raises(QueryFailed):
            route(Example("q", "text", "A"), sample_ns(), rel(0.0), 0.5, "unweighted", client, LS)

    def test_relevance_neighbor_mismatch_rejected(self):
        with pytest.raises(ValueError, match="relevance is for"):
            route(
                Example("q", "t", "A"),
                sample_ns(),
                rel(0.9, query_id="other"),
                0.5,
                "unweighted",
                echo_client(),
                LS,
            )
        with pytest.raises(ValueError, match="k="):
            route(Example("q", "t", "A"), sample_ns(), rel(0.9, k=7), 0.5, "unweighted", echo_client(), LS)

    def test_bad_knn_mode_rejected(self):
        with pytest.raises(ValueError, match="knn_mode"):
            route(Example("q", "t", "A"), sample_ns(), rel(0.9), 0.5, "sideways", echo_client(), LS)

    def test_decision_carries_relevance_source(self):
        decision = route(
            Example("q", "t", "A"),
            sample_ns(),
            rel(0.9, annotator="llm:judge"),
            0.5,
            "unweighted",
            echo_client(),
            LS,
        )
        assert decision.relevance_source == "llm:judge"


class TestRouteDecisionInvariants:
    def knn_pred(self):
        return Prediction(query_id="q", label="A", model="knn")

    def test_route_must_match_gate(self):
        with pytest.raises(ValueError, match="contradicts"):
            RouteDecision(query_id="q", relevance=0.9, threshold=0.5, route="llm",
                          prediction=Prediction(query_id="q", label="A", model="llm"))
        with pytest.raises(ValueError, match="contradicts"):
            RouteDecision(query_id="q", relevance=0.1, threshold=0.5, route="knn",
                          prediction=self.knn_pred())

    def test_prediction_model_must_match_route(self):
        with pytest.raises(ValueError, match="inconsistent with route"):
            RouteDecision(query_id="q", relevance=0.9, threshold=0.5, route="knn",
                          prediction=Prediction(query_id="q", label="A", model="llm"))

    def test_unknown_route_rejected(self):
        with pytest.raises(ValueError, match="route must be"):
            RouteDecision(query_id="q", relevance=0.9, threshold=0.5, route="lr",
                          prediction=self.knn_pred())

    def test_as_prediction_retags_to_router(self):
        decision = RouteDecision(
            query_id="q", relevance=0.9, threshold=0.5, route="knn", prediction=self.knn_pred()
        )
        as_pred = decision.as_prediction()
        assert as_pred.model == "router"
        assert as_pred.label == "A"


class TestAuditLog:
    def test_appends_one_json_line_per_decision(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        audit = RouterAuditLog(path)
        for score in (0.9, 0.2):
            route(
                Example("q", "text", "A"),
                sample_ns(),
                rel(score),
                0.5,
                "unweighted",
                echo_client(),
                LS,
                audit=audit,
            )
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        first = json.loads(lines[0])
        assert first["route"] == "knn"
        assert first["relevance"] == 0.9
        assert first["relevance_source"] == PROXY_ANNOTATOR
        second = json.loads(lines[1])
        assert second["route"] == "llm"
        assert set(first) == {
            "query_id", "relevance", "threshold", "route", "label", "model", "relevance_source",
        }
