"""Agreement and correlation statistics over prediction sets.

Every statistic that can be undefined (empty valid set, zero variance,
degenerate marginals, empty partition) reports that explicitly instead of
returning a silent zero. Queries with failed predictions are dropped
pairwise, per model pair, never globally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classifiers import Prediction
from .llm import RelevanceVerdict
from .retrieval import NeighborSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContingencyMatrix:
    """Joint label counts: rows are model A, columns model B."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    n: int

    def __post_init__(self) -> None:
        size = len(self.labels)
        if len(self.counts) != size or any(len(row) != size for row in self.counts):
            raise ValueError(f"counts must be {size}x{size}")
        total = sum(sum(row) for row in self.counts)
        if total != self.n:
            raise ValueError(f"counts sum to {total}, n says {self.n}")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("counts must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.float64)


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    p_o: float
    p_e: float
    matrix: ContingencyMatrix
    degenerate: bool = False


@dataclass(frozen=True)
class RelevanceScore:
    query_id: str
    k: int
    annotator: str  # "human:<id>" or "llm:<model>"
    score: float


@dataclass(frozen=True)
class CorrelationReport:
    r: float | None
    r_squared: float | None
    n: int
    undefined: bool = False


@dataclass(frozen=True)
class AccuracyReport:
    value: float | None
    n_valid: int
    n_excluded: int

    @property
    def undefined(self) -> bool:
        return self.value is None


def accuracy(
    preds: Sequence[Prediction], gold: Mapping[str, str], excluded: int = 0
) -> AccuracyReport:
    """Fraction of predictions matching gold; failed queries are not in
    `preds` and enter only through the `excluded` count."""
    for p in preds:
        if p.query_id not in gold:
            raise KeyError(f"prediction for unknown query {p.query_id!r}")
    n_valid = len(preds)
    if n_valid == 0:
        return AccuracyReport(value=None, n_valid=0, n_excluded=excluded)
    hits = sum(1 for p in preds if p.label == gold[p.query_id])
    return AccuracyReport(value=hits / n_valid, n_valid=n_valid, n_excluded=excluded)


@dataclass(frozen=True)
class GridCell:
    dataset: str
    k: int
    model_a: str
    model_b: str
    diff: float | None

    @property
    def hole(self) -> bool:
        return self.diff is None


def accuracy_diff_grid(
    acc: Mapping[tuple[str, int, str, str], tuple[float | None, float | None]],
) -> list[GridCell]:
    """Absolute accuracy differences per (dataset, k, modelA, modelB) cell;
    a missing accuracy leaves a flagged hole, never a zero."""
    cells = []
    for (dataset, k, model_a, model_b), (acc_a, acc_b) in sorted(acc.items()):
        diff = abs(acc_a - acc_b) if acc_a is not None and acc_b is not None else None
        cells.append(GridCell(dataset=dataset, k=k, model_a=model_a, model_b=model_b, diff=diff))
    return cells


def _by_query(preds: Sequence[Prediction], side: str) -> dict[str, Prediction]:
    out: dict[str, Prediction] = {}
    for p in preds:
        if p.query_id in out:
            raise ValueError(f"duplicate {side} prediction for query {p.query_id!r}")
        out[p.query_id] = p
    return out


def contingency(
    preds_a: Sequence[Prediction], preds_b: Sequence[Prediction], labels: Sequence[str]
) -> ContingencyMatrix:
    """Joint counts over queries both models predicted (pairwise exclusion)."""
    label_list = tuple(labels)
    index = {lab: i for i, lab in enumerate(label_list)}
    a_map = _by_query(preds_a, "A")
    b_map = _by_query(preds_b, "B")
    shared = sorted(a_map.keys() & b_map.keys())
    if not shared and (a_map or b_map):
        log.warning("contingency over disjoint query sets: n=0")
    counts = [[0] * len(label_list) for _ in label_list]
    for qid in shared:
        la, lb = a_map[qid].label, b_map[qid].label
        if la not in index:
            raise ValueError(f"label {la!r} outside label space {label_list}")
        if lb not in index:
            raise ValueError(f"label {lb!r} outside label space {label_list}")
        counts[index[la]][index[lb]] += 1
    return ContingencyMatrix(
        labels=label_list, counts=tuple(tuple(row) for row in counts), n=len(shared)
    )


def cohen_kappa(m: ContingencyMatrix) -> AgreementReport:
    """Multi-class kappa: p_o = trace/n, p_e = sum of marginal products.

    Both raters constant on the same label makes p_e = 1; kappa is then
    reported as 0 with the degenerate flag set.
    """
    if m.n < 1:
        raise ValueError("kappa needs at least one jointly-valid query")
    counts = m.as_array()
    n = float(m.n)
    p_o = float(np.trace(counts)) / n
    row = counts.sum(axis=1) / n
    col = counts.sum(axis=0) / n
    p_e = float(np.dot(row, col))
    if p_e >= 1.0:
        return AgreementReport(kappa=0.0, p_o=p_o, p_e=p_e, matrix=m, degenerate=True)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementReport(kappa=kappa, p_o=p_o, p_e=p_e, matrix=m)


def verdict_contingency(
    verdicts_a: Sequence[RelevanceVerdict], verdicts_b: Sequence[RelevanceVerdict]
) -> ContingencyMatrix:
    """2x2 No/Yes contingency between two annotators over shared
    (query, example) pairs; feeds the relevance-kappa computation."""

    def keyed(verdicts: Sequence[RelevanceVerdict], side: str) -> dict[tuple[str, str], bool]:
        out: dict[tuple[str, str], bool] = {}
        for v in verdicts:
            key = (v.query_id, v.example_id)
            if key in out:
                raise ValueError(f"duplicate {side} verdict for pair {key}")
            out[key] = v.relevant
        return out

    a_map = keyed(verdicts_a, "A")
    b_map = keyed(verdicts_b, "B")
    shared = sorted(a_map.keys() & b_map.keys())
    counts = [[0, 0], [0, 0]]
    for key in shared:
        counts[int(a_map[key])][int(b_map[key])] += 1
    return ContingencyMatrix(
        labels=("No", "Yes"), counts=tuple(tuple(row) for row in counts), n=len(shared)
    )


def relevance_score(
    judgments: Sequence[RelevanceVerdict], k: int
) -> RelevanceScore:
    """Mean of the k Boolean verdicts for one (query, annotator) pair."""
    if not judgments:
        raise ValueError("relevance_score needs judgments")
    query_ids = {v.query_id for v in judgments}
    annotators = {v.annotator_id for v in judgments}
    if len(query_ids) != 1 or len(annotators) != 1:
        raise ValueError(
            f"judgments must cover one (query, annotator) pair, got {query_ids} x {annotators}"
        )
    example_ids = [v.example_id for v in judgments]
    if len(set(example_ids)) != len(example_ids):
        raise ValueError(f"duplicate example_ids in judgments: {sorted(example_ids)}")
    if len(judgments) != k:
        raise ValueError(
            f"query {next(iter(query_ids))!r} needs exactly {k} judgments, "
            f"got {len(judgments)} ({sorted(example_ids)})"
        )
    score = sum(1 for v in judgments if v.relevant) / k
    return RelevanceScore(
        query_id=next(iter(query_ids)), k=k, annotator=next(iter(annotators)), score=score
    )


@dataclass(frozen=True)
class InclusionReport:
    value: float | None
    n_human: int
    n_shared: int

    @property
    def undefined(self) -> bool:
        return self.value is None


def inclusion_score(
    human: Iterable[tuple[str, str]], machine: Iterable[tuple[str, str]]
) -> InclusionReport:
    """Fraction of human-relevant (query, example) pairs the machine also
    marked relevant; empty human set is undefined, not zero."""
    h = set(human)
    m = set(machine)
    if not h:
        return InclusionReport(value=None, n_human=0, n_shared=0)
    shared = len(h & m)
    return InclusionReport(value=shared / len(h), n_human=len(h), n_shared=shared)


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationReport:
    """Pearson r from population moments; r_squared is exactly r*r."""
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("pearson needs at least 2 points")
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    var_x = float(np.mean(dx * dx))
    var_y = float(np.mean(dy * dy))
    if var_x == 0.0 or var_y == 0.0:
        return CorrelationReport(r=None, r_squared=None, n=len(x), undefined=True)
    cov = float(np.mean(dx * dy))
    r = cov / (var_x**0.5 * var_y**0.5)
    r = max(-1.0, min(1.0, r))
    return CorrelationReport(r=r, r_squared=r * r, n=len(x))


@dataclass(frozen=True)
class SameLabelReport:
    pct_all_same_label: float
    agree_rate_given_same: float | None
    agree_rate_given_diff: float | None
    n: int = 0


def same_label_stats(
    neighbor_sets: Mapping[str, NeighborSet],
    preds_a: Sequence[Prediction],
    preds_b: Sequence[Prediction],
) -> SameLabelReport:
    """Partition queries by unanimous neighborhoods and report the A-vs-B
    agreement rate inside each partition; an empty partition's rate is
    undefined rather than zero."""
    a_map = _by_query(preds_a, "A")
    b_map = _by_query(preds_b, "B")
    shared = sorted(neighbor_sets.keys() & a_map.keys() & b_map.keys())
    if not shared:
        raise ValueError("no query has a NeighborSet and both predictions")
    same_agree = same_total = diff_agree = diff_total = 0
    for qid in shared:
        labels = neighbor_sets[qid].labels()
        agree = a_map[qid].label == b_map[qid].label
        if len(set(labels)) == 1:
            same_total += 1
            same_agree += int(agree)
        else:
            diff_total += 1
            diff_agree += int(agree)
    return SameLabelReport(
        pct_all_same_label=same_total / len(shared),
        agree_rate_given_same=(same_agree / same_total) if same_total else None,
        agree_rate_given_diff=(diff_agree / diff_total) if diff_total else None,
        n=len(shared),
    )
