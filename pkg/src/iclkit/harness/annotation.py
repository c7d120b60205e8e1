"""Human-annotation plumbing: task batches, judgment files, verdict stores.

A task is one (query, example) pair shown to one annotator at one k setting;
the same example can therefore appear once per k, which is what makes a
batch of n queries over k values sum to n x (k1 + k2 + ...) tasks.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import load_dataset
from ..llm import RelevanceVerdict
from .config import ExperimentConfig
from .runner import cell_record_path, load_cell_records

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    dataset: str
    k: int
    query_id: str
    query_text: str
    example_id: str
    example_text: str
    task_description: str
    annotator_id: str
    status: str = "pending"  # pending | done

    def done(self) -> "AnnotationTask":
        return replace(self, status="done")


def task_id_for(dataset: str, k: int, query_id: str, example_id: str, annotator_id: str) -> str:
    return f"{dataset}:k{k}:{query_id}:{example_id}:{annotator_id}"


def make_annotation_batch(
    config: ExperimentConfig,
    n_queries: int,
    seed: int,
    ks: Sequence[int],
    annotator_id: str,
    dataset_name: str | None = None,
) -> list[AnnotationTask]:
    """Sample n_queries from a finished run and emit one task per
    (query, k, neighbor); n queries over ks yields n x sum(ks) tasks.

    The same seeded sample is reused across every k, so each sampled query is
    judged at all requested depths. Requires the run records (the neighbor
    sets) to exist already.
    """
    if n_queries < 1:
        raise ValueError("n_queries must be at least 1")
    if not ks:
        raise ValueError("ks must be non-empty")
    ds_cfg = None
    for d in config.datasets:
        if dataset_name is None or d.name == dataset_name:
            ds_cfg = d
            break
    if ds_cfg is None:
        raise ValueError(f"dataset {dataset_name!r} not in config")
    for k in ks:
        if k not in config.k_values:
            raise ValueError(f"k={k} not among configured k_values {config.k_values}")

    neighbors_by_k: dict[int, dict[str, list[str]]] = {}
    for k in ks:
        path = cell_record_path(config.out_dir, ds_cfg.name, k)
        if not path.exists():
            raise FileNotFoundError(
                f"no records at {path}; run the experiment before batching annotations"
            )
        records = load_cell_records(path)
        neighbors_by_k[k] = {
            r["query_id"]: [example_id for example_id, _ in r["neighbors"]] for r in records
        }

    common = set.intersection(*(set(m.keys()) for m in neighbors_by_k.values()))
    if len(common) < n_queries:
        raise ValueError(
            f"need {n_queries} queries recorded at every k in {list(ks)}, "
            f"only {len(common)} available"
        )
    rng = random.Random(seed)
    sampled = rng.sample(sorted(common), n_queries)

    dataset = load_dataset(ds_cfg.path, ds_cfg.format, name=ds_cfg.name, labels=ds_cfg.labels)
    by_id = dataset.examples_by_id

    tasks: list[AnnotationTask] = []
    for qid in sampled:
        for k in sorted(ks):
            for example_id in neighbors_by_k[k][qid]:
                tasks.append(
                    AnnotationTask(
                        task_id=task_id_for(ds_cfg.name, k, qid, example_id, annotator_id),
                        dataset=ds_cfg.name,
                        k=k,
                        query_id=qid,
                        query_text=by_id[qid].text,
                        example_id=example_id,
                        example_text=by_id[example_id].text,
                        task_description=ds_cfg.task_description,
                        annotator_id=annotator_id,
                    )
                )
    return tasks


def write_task_batch(tasks: Sequence[AnnotationTask], path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.__dict__, sort_keys=True) + "\n")
    return p


def load_task_batch(path: str | Path) -> list[AnnotationTask]:
    tasks = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                tasks.append(AnnotationTask(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no} bad task record: {exc}") from exc
    return tasks


@dataclass(frozen=True)
class HumanJudgment:
    """One ingested Boolean judgment, carrying enough context for reports."""

    dataset: str
    k: int
    query_id: str
    example_id: str
    relevant: bool
    annotator_id: str  # bare id; reports prefix it as human:<id>

    def to_verdict(self) -> RelevanceVerdict:
        return RelevanceVerdict(
            query_id=self.query_id,
            example_id=self.example_id,
            relevant=self.relevant,
            annotator_id=f"human:{self.annotator_id}",
        )


def ingest_judgments(
    source: str | Path | Iterable[dict], tasks: Sequence[AnnotationTask]
) -> list[HumanJudgment]:
    """Resolve raw judgments against their tasks.

    Accepts a JSONL path or an iterable of {"task_id", "relevant"} dicts.
    A judgment whose task_id matches no known task is rejected outright;
    duplicates resolve last-write-wins with a warning. Output is ordered by
    task order, so ingestion is deterministic regardless of input order.
    """
    by_task_id = {t.task_id: t for t in tasks}
    if isinstance(source, (str, Path)):
        raw: list[dict] = []
        with Path(source).open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{source}:{line_no} bad judgment: {exc}") from exc
    else:
        raw = list(source)

    latest: dict[str, bool] = {}
    for entry in raw:
        task_id = entry.get("task_id")
        if task_id not in by_task_id:
            raise ValueError(f"judgment references unknown task {task_id!r}")
        relevant = entry.get("relevant")
        if not isinstance(relevant, bool):
            raise ValueError(f"judgment for task {task_id!r} has non-boolean relevant field")
        if task_id in latest:
            log.warning(
                "duplicate judgment for task %s: keeping the later verdict (%s)",
                task_id,
                relevant,
            )
        latest[task_id] = relevant

    out: list[HumanJudgment] = []
    for t in tasks:
        if t.task_id in latest:
            out.append(
                HumanJudgment(
                    dataset=t.dataset,
                    k=t.k,
                    query_id=t.query_id,
                    example_id=t.example_id,
                    relevant=latest[t.task_id],
                    annotator_id=t.annotator_id,
                )
            )
    return out


def store_judgments(judgments: Sequence[HumanJudgment], path: str | Path) -> Path:
    """Write the merged verdict store consumed by export (idempotent rewrite)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for j in judgments:
            fh.write(json.dumps(j.__dict__, sort_keys=True) + "\n")
    return p


def load_judgments(path: str | Path) -> list[HumanJudgment]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(HumanJudgment(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no} bad judgment record: {exc}") from exc
    return out
