"""
Hash embeddings and exact top-k retrieval
=========================================
"""

import numpy as np

from iclkit import HashingEmbedder, Index, cosine_similarity

embedder = HashingEmbedder(dims=256, seed=0)
print("provider:", embedder.provider_id)

train_texts = [
    "the team won the final",
    "a tense match decided on penalties",
    "parliament passed the budget",
    "the minister resigned over the vote",
    "stocks rallied after the earnings call",
    "the market closed higher on tech gains",
]
train_labels = ["Sports", "Sports", "Politics", "Politics", "Business", "Business"]
train_ids = [f"d{i}" for i in range(len(train_texts))]

vectors = embedder.embed_batch(train_texts)
print("vector shape:", np.asarray(vectors).shape)

# texts sharing tokens land closer in the hashed space
q = embedder.embed_batch(["who won the tense match"])[0]
for text, vec in zip(train_texts, vectors):
    print(f"  {cosine_similarity(q, vec):+.3f}  {text}")

index = Index(ids=train_ids, vectors=np.asarray(vectors), labels=train_labels, texts=train_texts)
ns = index.topk("q0", q, k=3)
print("top-3 neighbors (descending similarity, ids break ties):")
for n in ns.neighbors:
    print(f"  {n.example_id}  sim={n.similarity:.3f}  label={n.label}  {n.text}")
print("evidence digest:", ns.digest())
