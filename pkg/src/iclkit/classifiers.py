"""Neighbor-evidence classifiers: kNN votes and logistic regression on top-k.

Both predictors consume the same NeighborSet the LLM sees. kNN votes by
majority (optionally similarity-weighted); the LR path fits a TF-IDF
vectorizer and a multinomial logistic regression from scratch on just the
retrieved neighbors, collapsing to 1-NN when there is a single neighbor or a
unanimous label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import LabelSpace
from .retrieval import NeighborSet

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class Prediction:
    """A label plus its producing model identity; the unit compared across models."""

    query_id: str
    label: str
    model: str  # knn | wknn | lr | llm | llm_weighted | llm_zeroshot | router
    score_by_label: dict[str, float] | None = None


def _argmax_label(primary: dict[str, float], cum_sim: dict[str, float]) -> str:
    """Pick the label with the highest primary score; break ties by highest
    cumulative similarity, then lexicographically smallest label."""
    return min(primary, key=lambda lab: (-primary[lab], -cum_sim.get(lab, 0.0), lab))


def knn_predict(ns: NeighborSet, weighted: bool) -> Prediction:
    """Vote over the neighbor labels.

    Unweighted: plain majority count. Weighted: each neighbor's vote counts
    its similarity score. Ties go to the label with the higher cumulative
    similarity, then the lexicographically smaller one.
    """
    if not ns.neighbors:
        raise ValueError(f"empty NeighborSet for query {ns.query_id!r}")
    counts: dict[str, float] = {}
    sim_sums: dict[str, float] = {}
    for n in ns.neighbors:
        counts[n.label] = counts.get(n.label, 0.0) + 1.0
        sim_sums[n.label] = sim_sums.get(n.label, 0.0) + n.similarity
    if weighted:
        label = _argmax_label(sim_sums, sim_sums)
        scores = dict(sim_sums)
    else:
        label = _argmax_label(counts, sim_sums)
        scores = dict(counts)
    return Prediction(
        query_id=ns.query_id,
        label=label,
        model="wknn" if weighted else "knn",
        score_by_label=scores,
    )


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; no stemming or stop words."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TfidfModel:
    """TF-IDF vectorizer with smoothed idf: ln((1+N)/(1+df)) + 1."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    fitted_on: list[str] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)


def tfidf_fit(texts: Sequence[str], fitted_on: Sequence[str] | None = None) -> TfidfModel:
    if not texts:
        raise ValueError("tfidf_fit needs at least one text")
    tokenized = [tokenize(t) for t in texts]
    if all(not toks for toks in tokenized):
        raise ValueError("all texts empty after tokenization")
    vocab_tokens = sorted({tok for toks in tokenized for tok in toks})
    vocabulary = {tok: i for i, tok in enumerate(vocab_tokens)}
    n = len(texts)
    df = np.zeros(len(vocabulary), dtype=np.float64)
    for toks in tokenized:
        for tok in set(toks):
            df[vocabulary[tok]] += 1.0
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    return TfidfModel(
        vocabulary=vocabulary,
        idf=idf,
        fitted_on=list(fitted_on) if fitted_on is not None else [],
    )


def tfidf_transform(model: TfidfModel, text: str) -> np.ndarray:
    """Map text to its L2-normalized tf-idf vector; all-OOV text maps to zero."""
    vec = np.zeros(model.n_features, dtype=np.float64)
    for tok in tokenize(text):
        idx = model.vocabulary.get(tok)
        if idx is not None:
            vec[idx] += 1.0
    vec *= model.idf
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class LrHyper:
    l2: float = 1.0
    max_iters: int = 500
    tol: float = 1e-6


@dataclass
class LogRegModel:
    """Multinomial logistic regression trained by deterministic full-batch descent."""

    weights: np.ndarray  # (n_labels, n_features)
    bias: np.ndarray  # (n_labels,)
    labels: tuple[str, ...]  # row order
    classes_seen: frozenset[str]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits = self.weights @ x + self.bias
        logits -= logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def predict(self, x: np.ndarray) -> str:
        proba = self.predict_proba(x)
        best = min(range(len(self.labels)), key=lambda i: (-proba[i], self.labels[i]))
        return self.labels[best]


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logreg_loss_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy plus (l2/2)*||W||^2 with its analytic gradient.

    `targets` is one-hot (n_samples, n_labels). The bias is not regularized.
    """
    n = features.shape[0]
    proba = _softmax_rows(features @ weights.T + bias)
    eps = 1e-300  # guards log(0) when a class probability underflows
    loss = -float(np.sum(targets * np.log(proba + eps))) / n
    loss += 0.5 * l2 * float(np.sum(weights * weights))
    delta = (proba - targets) / n
    grad_w = delta.T @ features + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def logreg_train(
    features: Sequence[np.ndarray] | np.ndarray,
    labels: Sequence[str],
    hyper: LrHyper = LrHyper(),
    label_space: LabelSpace | None = None,
) -> LogRegModel:
    """Train from zero initialization with full-batch gradient descent.

    The step halves whenever a step fails to decrease the loss; training
    stops when the gradient infinity-norm drops below `hyper.tol` or after
    `hyper.max_iters` steps. Entirely deterministic. A single distinct label
    yields a degenerate constant predictor, flagged through `classes_seen`.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise ValueError(f"features {x.shape} do not align with {len(labels)} labels")
    seen = frozenset(labels)
    if label_space is not None:
        row_labels = tuple(label_space.labels)
    else:
        row_labels = tuple(sorted(seen))
    label_index = {lab: i for i, lab in enumerate(row_labels)}
    n, v = x.shape
    c = len(row_labels)
    targets = np.zeros((n, c), dtype=np.float64)
    for i, lab in enumerate(labels):
        targets[i, label_index[lab]] = 1.0

    weights = np.zeros((c, v), dtype=np.float64)
    bias = np.zeros(c, dtype=np.float64)
    if len(seen) < 2:
        # Nothing to separate: bias the single observed class up so the model
        # constantly predicts it.
        only = labels[0]
        bias[label_index[only]] = 1.0
        return LogRegModel(weights=weights, bias=bias, labels=row_labels, classes_seen=seen)

    loss, grad_w, grad_b = logreg_loss_grad(weights, bias, x, targets, hyper.l2)
    step = 1.0
    for _ in range(hyper.max_iters):
        if max(float(np.abs(grad_w).max()), float(np.abs(grad_b).max())) < hyper.tol:
            break
        while True:
            new_w = weights - step * grad_w
            new_b = bias - step * grad_b
            new_loss, new_gw, new_gb = logreg_loss_grad(new_w, new_b, x, targets, hyper.l2)
            if new_loss < loss or step < 1e-12:
                break
            step *= 0.5
        weights, bias, loss, grad_w, grad_b = new_w, new_b, new_loss, new_gw, new_gb
    return LogRegModel(weights=weights, bias=bias, labels=row_labels, classes_seen=seen)


def lr_on_topk(
    ns: NeighborSet,
    query_text: str,
    hyper: LrHyper = LrHyper(),
    label_space: LabelSpace | None = None,
) -> Prediction:
    """Logistic regression trained on only the retrieved neighbors.

    A single neighbor or a unanimous neighborhood short-circuits to that
    label (the 1-NN / degenerate path). Otherwise the neighbors' texts fit a
    TF-IDF space, an LR model trains on them, and the transformed query is
    scored; an all-OOV query reduces to the bias argmax automatically.
    """
    if not ns.neighbors:
        raise ValueError(f"empty NeighborSet for query {ns.query_id!r}")
    neighbor_labels = ns.labels()
    if len(ns.neighbors) == 1 or len(set(neighbor_labels)) == 1:
        return Prediction(query_id=ns.query_id, label=neighbor_labels[0], model="lr")
    tfidf = tfidf_fit([n.text for n in ns.neighbors], fitted_on=[n.example_id for n in ns.neighbors])
    features = np.stack([tfidf_transform(tfidf, n.text) for n in ns.neighbors])
    model = logreg_train(features, neighbor_labels, hyper=hyper, label_space=label_space)
    query_vec = tfidf_transform(tfidf, query_text)
    proba = model.predict_proba(query_vec)
    return Prediction(
        query_id=ns.query_id,
        label=model.predict(query_vec),
        model="lr",
        score_by_label={lab: float(p) for lab, p in zip(model.labels, proba)},
    )
