"""
TF-IDF features and logistic regression on retrieved neighbors
==============================================================
"""

import numpy as np

from iclkit import Neighbor, NeighborSet, lr_on_topk, logreg_train, tfidf_fit, tfidf_transform

texts = [
    "goals and a late winner",
    "the striker scored twice",
    "interest rates rose again",
    "the central bank held rates",
]
labels = ["Sports", "Sports", "Business", "Business"]

tfidf = tfidf_fit(texts)
print("vocabulary size:", tfidf.n_features)
features = np.stack([tfidf_transform(tfidf, t) for t in texts])
print("feature matrix:", features.shape, " row norms:", np.round(np.linalg.norm(features, axis=1), 3))

model = logreg_train(features, labels)
query = tfidf_transform(tfidf, "rates and the bank")
proba = {lab: round(float(p), 3) for lab, p in zip(model.labels, model.predict_proba(query))}
print("P(label|query):", proba)
print("prediction:", model.predict(query))

# lr_on_topk wraps the whole fit-transform-train-predict loop around one NeighborSet
neighbors = tuple(
    Neighbor(example_id=f"e{i}", similarity=0.8 - 0.1 * i, label=lab, text=txt)
    for i, (txt, lab) in enumerate(zip(texts, labels))
)
ns = NeighborSet(query_id="q", k=4, neighbors=neighbors)
pred = lr_on_topk(ns, "the bank moved rates")
print("lr_on_topk:", pred.label, dict((k, round(v, 3)) for k, v in pred.score_by_label.items()))

# unanimous neighborhoods skip training entirely (1-NN short circuit)
pure = NeighborSet(query_id="q2", k=2, neighbors=neighbors[:2])
print("unanimous neighborhood:", lr_on_topk(pure, "anything").label)
