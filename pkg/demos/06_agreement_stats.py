"""
Agreement and correlation statistics
====================================
"""

from iclkit import (
    Prediction,
    RelevanceVerdict,
    cohen_kappa,
    contingency,
    inclusion_score,
    pearson,
    relevance_score,
    verdict_contingency,
)

labels = ("Negative", "Positive")

knn = [Prediction(f"q{i}", lab, "knn") for i, lab in enumerate(
    ["Positive", "Positive", "Negative", "Negative", "Positive", "Negative"])]
llm = [Prediction(f"q{i}", lab, "llm") for i, lab in enumerate(
    ["Positive", "Negative", "Negative", "Negative", "Positive", "Positive"])]

matrix = contingency(knn, llm, labels)
print("contingency counts:", matrix.counts, " n =", matrix.n)
report = cohen_kappa(matrix)
print(f"kappa={report.kappa:.3f}  p_o={report.p_o:.3f}  p_e={report.p_e:.3f}")

# fraction of a query's top-k judged relevant
verdicts = [
    RelevanceVerdict("q0", f"e{i}", rel, "llm:mock") for i, rel in enumerate([True, True, False, True])
]
print("relevance score:", relevance_score(verdicts, k=4).score)

# human vs machine relevance: 2x2 agreement plus the inclusion direction
human = [RelevanceVerdict("q0", f"e{i}", rel, "human:h1") for i, rel in enumerate([True, True, False, False])]
print("verdict contingency:", verdict_contingency(human, verdicts).counts)
h_pairs = [(v.query_id, v.example_id) for v in human if v.relevant]
m_pairs = [(v.query_id, v.example_id) for v in verdicts if v.relevant]
print("inclusion of human in machine:", inclusion_score(h_pairs, m_pairs).value)

# Pearson r with its exact r-squared companion
xs = [0.20, 0.35, 0.50, 0.65, 0.80]
ys = [0.31, 0.42, 0.44, 0.63, 0.70]
corr = pearson(xs, ys)
print(f"r={corr.r:.3f}  r_squared={corr.r_squared:.3f}  (identity: {corr.r_squared == corr.r * corr.r})")
