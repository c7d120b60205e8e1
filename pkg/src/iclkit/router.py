"""Relevance-gated dispatch: kNN when the demonstrations look relevant
enough, otherwise the LLM (which still receives the demonstrations and may
fall back on its parametric memory).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .analysis import RelevanceScore
from .classifiers import Prediction, knn_predict
from .corpus import Example, LabelSpace
from .llm import LlmClient, build_icl_prompt, llm_predict
from .retrieval import NeighborSet

DEFAULT_THRESHOLD = 0.5

PROXY_ANNOTATOR = "proxy:mean_similarity"


@dataclass(frozen=True)
class RouteDecision:
    query_id: str
    relevance: float
    threshold: float
    route: str  # knn | llm
    prediction: Prediction
    relevance_source: str = PROXY_ANNOTATOR

    def __post_init__(self) -> None:
        if self.route not in ("knn", "llm"):
            raise ValueError(f"route must be knn or llm, got {self.route!r}")
        gate_open = self.relevance >= self.threshold
        if gate_open != (self.route == "knn"):
            raise ValueError(
                f"route {self.route!r} contradicts relevance {self.relevance} "
                f"vs threshold {self.threshold}"
            )
        expected = ("knn", "wknn") if self.route == "knn" else ("llm",)
        if self.prediction.model not in expected:
            raise ValueError(
                f"prediction model {self.prediction.model!r} inconsistent with route {self.route!r}"
            )

    def as_prediction(self) -> Prediction:
        """The routed label under the router's own model tag, for run records."""
        return Prediction(
            query_id=self.query_id,
            label=self.prediction.label,
            model="router",
            score_by_label=self.prediction.score_by_label,
        )


class RouterAuditLog:
    """Append-only JSONL log of routing decisions; safe under concurrent routes."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, decision: RouteDecision) -> None:
        entry = {
            "query_id": decision.query_id,
            "relevance": decision.relevance,
            "threshold": decision.threshold,
            "route": decision.route,
            "label": decision.prediction.label,
            "model": decision.prediction.model,
            "relevance_source": decision.relevance_source,
        }
        line = json.dumps(entry, sort_keys=True)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def proxy_relevance(ns: NeighborSet) -> RelevanceScore:
    """Relevance stand-in when no annotator is configured: the mean neighbor
    similarity, clamped to [0, 1]."""
    if not ns.neighbors:
        raise ValueError(f"empty NeighborSet for query {ns.query_id!r}")
    mean_sim = sum(n.similarity for n in ns.neighbors) / len(ns.neighbors)
    return RelevanceScore(
        query_id=ns.query_id,
        k=ns.k,
        annotator=PROXY_ANNOTATOR,
        score=max(0.0, min(1.0, mean_sim)),
    )


def route(
    query: Example,
    ns: NeighborSet,
    rel: RelevanceScore,
    threshold: float,
    knn_mode: str,
    llm_client: LlmClient,
    ls: LabelSpace,
    audit: RouterAuditLog | None = None,
) -> RouteDecision:
    """Dispatch one query: relevance at or above the threshold goes to kNN,
    anything below goes to the LLM with the plain ICL prompt.

    LLM-route failures propagate QueryFailed; the kNN route cannot fail on a
    valid NeighborSet.
    """
    if rel.query_id != ns.query_id:
        raise ValueError(f"relevance is for {rel.query_id!r}, neighbors for {ns.query_id!r}")
    if rel.k != ns.k:
        raise ValueError(f"relevance computed at k={rel.k}, neighbors at k={ns.k}")
    if knn_mode not in ("weighted", "unweighted"):
        raise ValueError(f"knn_mode must be weighted or unweighted, got {knn_mode!r}")
    if rel.score >= threshold:
        prediction = knn_predict(ns, weighted=knn_mode == "weighted")
        route_taken = "knn"
    else:
        prompt = build_icl_prompt(ns, query, ls, mode="plain")
        prediction = llm_predict(llm_client, prompt)
        route_taken = "llm"
    decision = RouteDecision(
        query_id=query.id,
        relevance=rel.score,
        threshold=threshold,
        route=route_taken,
        prediction=prediction,
        relevance_source=rel.annotator,
    )
    if audit is not None:
        audit.append(decision)
    return decision
