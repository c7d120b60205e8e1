"""
Relevance-gated routing between kNN and the LLM
===============================================

High neighbor relevance answers locally with the vote; low relevance falls
back to the LLM, which may use knowledge the neighbors lack.
"""

import tempfile
from pathlib import Path

from iclkit import (
    LlmClient,
    Neighbor,
    NeighborSet,
    RouterAuditLog,
    ScriptedChatBackend,
    proxy_relevance,
    route,
)
from iclkit.corpus import Example, LabelSpace
from iclkit.llm import majority_echo_script

labels = LabelSpace(("Business", "Sports"))
client = LlmClient(ScriptedChatBackend(majority_echo_script), model="mock")
audit = RouterAuditLog(Path(tempfile.mkdtemp()) / "audit.jsonl")

query = Example(id="q0", text="shares slid after earnings", label="Business")
close = NeighborSet("q0", 2, (
    Neighbor("e0", 0.91, "Business", "stocks fell on earnings"),
    Neighbor("e1", 0.88, "Business", "the market dropped"),
))
far = NeighborSet("q0", 2, (
    Neighbor("e2", 0.12, "Sports", "a late goal won it"),
    Neighbor("e3", 0.09, "Business", "rates held steady"),
))

# without an annotator the mean neighbor similarity stands in for relevance
for ns in (close, far):
    rel = proxy_relevance(ns)
    decision = route(query, ns, rel, 0.5, "unweighted", client, labels, audit=audit)
    print(f"relevance={decision.relevance:.2f} -> {decision.route:4s} label={decision.prediction.label}")

print("\naudit log lines:")
print(audit.path.read_text(encoding="utf-8").strip())
