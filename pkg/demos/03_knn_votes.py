"""
Majority and similarity-weighted neighbor votes
===============================================
"""

from iclkit import Neighbor, NeighborSet, knn_predict


def make_ns(items):
    neighbors = tuple(
        Neighbor(example_id=f"e{i}", similarity=sim, label=lab, text=f"text {i}")
        for i, (sim, lab) in enumerate(items)
    )
    return NeighborSet(query_id="q", k=len(neighbors), neighbors=neighbors)


# two close Business neighbors outvote one strong Sports neighbor by count,
# but the weighted vote flips when the single neighbor is similar enough
ns = make_ns([(0.97, "Sports"), (0.48, "Business"), (0.47, "Business")])
print("unweighted:", knn_predict(ns, weighted=False).label)
print("weighted:  ", knn_predict(ns, weighted=True).label)
print("weighted scores:", knn_predict(ns, weighted=True).score_by_label)

# a count tie goes to the label with more cumulative similarity
tie = make_ns([(0.90, "Sports"), (0.30, "Business"), (0.20, "Business"), (0.85, "Sports")])
print("count tie ->", knn_predict(tie, weighted=False).label)

# a full tie falls back to the lexicographically smaller label
flat = make_ns([(0.5, "World"), (0.5, "Business")])
print("full tie ->", knn_predict(flat, weighted=False).label)
