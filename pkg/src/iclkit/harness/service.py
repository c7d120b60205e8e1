"""Annotation and classification service.

Endpoints: GET /tasks?annotator=..., POST /judgments, GET /status,
POST /classify, with the annotator UI's static build mounted at /. All
annotation state lives server-side: tasks come from batch files, judgments
append to a raw log and are folded into the merged per-annotator stores the
exporter reads, so a submitted judgment shows up in the next /status poll's
running relevance.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..corpus import Example, load_dataset
from ..llm import ChatBackend, QueryFailed
from ..retrieval import RetrievalError
from ..router import proxy_relevance, route
from .annotation import (
    AnnotationTask,
    HumanJudgment,
    ingest_judgments,
    load_task_batch,
    store_judgments,
)
from .config import ExperimentConfig
from .runner import (
    build_annotator_client,
    build_embedder,
    build_llm_client,
    cell_record_path,
    load_cell_records,
)

from ..analysis import RelevanceScore
from ..embedding import EmbeddingCache, EmbeddingError


class AnnotationStore:
    """Server-side task and judgment state, persisted as JSONL files."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.annotations_dir = self.out_dir / "annotations"
        self.raw_log = self.annotations_dir / "service-submissions.jsonl"
        self._lock = threading.Lock()
        self.tasks: list[AnnotationTask] = []
        self.by_task_id: dict[str, AnnotationTask] = {}
        self.latest: dict[str, bool] = {}
        self._load()

    def _load(self) -> None:
        if self.annotations_dir.exists():
            for path in sorted(self.annotations_dir.glob("batch-*.jsonl")):
                for task in load_task_batch(path):
                    if task.task_id not in self.by_task_id:
                        self.tasks.append(task)
                        self.by_task_id[task.task_id] = task
        if self.raw_log.exists():
            with self.raw_log.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    if entry.get("task_id") in self.by_task_id:
                        self.latest[entry["task_id"]] = bool(entry["relevant"])

    def tasks_for(self, annotator: str) -> list[AnnotationTask]:
        return [t for t in self.tasks if t.annotator_id == annotator]

    def pending_for(self, annotator: str) -> list[AnnotationTask]:
        return [t for t in self.tasks_for(annotator) if t.task_id not in self.latest]

    def submit(self, task_id: str, relevant: bool) -> tuple[AnnotationTask, str | None]:
        """Record one judgment; returns the task and a warning when it was
        already completed (the stored verdict is replaced, last write wins)."""
        task = self.by_task_id.get(task_id)
        if task is None:
            raise KeyError(task_id)
        with self._lock:
            warning = None
            if task_id in self.latest:
                warning = "task already completed; verdict replaced"
            self.latest[task_id] = relevant
            self.annotations_dir.mkdir(parents=True, exist_ok=True)
            with self.raw_log.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps({"task_id": task_id, "relevant": relevant}, sort_keys=True) + "\n"
                )
            self._rewrite_merged(task.annotator_id)
        return task, warning

    def _rewrite_merged(self, annotator: str) -> None:
        """Refresh the per-annotator judgment store the exporter consumes."""
        tasks = self.tasks_for(annotator)
        raw = [
            {"task_id": t.task_id, "relevant": self.latest[t.task_id]}
            for t in tasks
            if t.task_id in self.latest
        ]
        judgments = ingest_judgments(raw, tasks)
        store_judgments(judgments, self.annotations_dir / f"judgments-{annotator}.jsonl")

    def judgments_for(self, annotator: str) -> list[HumanJudgment]:
        tasks = self.tasks_for(annotator)
        raw = [
            {"task_id": t.task_id, "relevant": self.latest[t.task_id]}
            for t in tasks
            if t.task_id in self.latest
        ]
        return ingest_judgments(raw, tasks)

    def running_relevance(self) -> list[dict[str, Any]]:
        """Per (dataset, k, query, annotator): judged-so-far counts and the
        running mean, recomputed on every call so new judgments show at once."""
        groups: dict[tuple[str, int, str, str], list[bool]] = {}
        totals: dict[tuple[str, int, str, str], int] = {}
        for t in self.tasks:
            key = (t.dataset, t.k, t.query_id, t.annotator_id)
            totals[key] = totals.get(key, 0) + 1
            if t.task_id in self.latest:
                groups.setdefault(key, []).append(self.latest[t.task_id])
        rows = []
        for key in sorted(totals):
            dataset, k, query_id, annotator = key
            judged = groups.get(key, [])
            rows.append(
                {
                    "dataset": dataset,
                    "k": k,
                    "query_id": query_id,
                    "annotator": annotator,
                    "n_judged": len(judged),
                    "k_total": totals[key],
                    "running_score": (sum(judged) / len(judged)) if judged else None,
                }
            )
        return rows


class ClassifyContext:
    """Lazily assembled retrieval + LLM stack for the /classify endpoint."""

    def __init__(self, config: ExperimentConfig, llm_backend: ChatBackend | None = None):
        self.config = config
        self._llm_backend = llm_backend
        self._lock = threading.Lock()
        self._ready = False
        self.error: str | None = None

    def _build(self) -> None:
        from ..retrieval import index_build

        cfg = self.config
        ds_cfg = cfg.datasets[0]
        provider = build_embedder(cfg.embedder)
        cache_path = (
            Path(cfg.out_dir) / "cache" / f"{ds_cfg.name}.{provider.provider_id}.vec"
        )
        if not cache_path.exists():
            raise EmbeddingError(
                f"no embedding cache at {cache_path}; run `embed` or `run` first"
            )
        dataset = load_dataset(ds_cfg.path, ds_cfg.format, name=ds_cfg.name, labels=ds_cfg.labels)
        cache = EmbeddingCache.open(cache_path, provider.provider_id, provider.dims)
        self.provider = provider
        self.dataset = dataset
        self.task_description = ds_cfg.task_description
        self.index = index_build(cache, dataset)
        self.llm_client = build_llm_client(cfg.llm, backend=self._llm_backend)
        self.annotator_clients = [
            (a, build_annotator_client(a)) for a in cfg.annotators
        ]
        self._ready = True

    def ensure(self) -> None:
        with self._lock:
            if not self._ready:
                self._build()

    def classify(self, text: str, k: int, threshold: float) -> dict[str, Any]:
        from time import perf_counter

        from ..llm import llm_annotate_relevance

        started = perf_counter()
        vec = self.provider.embed_batch([text])[0]
        query = Example(id="adhoc", text=text, label="")
        ns = self.index.topk(query.id, vec, k)
        if self.annotator_clients:
            cfg, client = self.annotator_clients[0]
            verdicts = [
                llm_annotate_relevance(client, query, n, self.task_description)
                for n in ns.neighbors
            ]
            rel = RelevanceScore(
                query_id=query.id,
                k=ns.k,
                annotator=cfg.annotator_id,
                score=sum(1 for v in verdicts if v.relevant) / len(verdicts),
            )
        else:
            rel = proxy_relevance(ns)
        decision = route(
            query,
            ns,
            rel,
            threshold,
            self.config.router_knn_mode,
            self.llm_client,
            self.dataset.label_space,
        )
        return {
            "label": decision.prediction.label,
            "route": decision.route,
            "relevance": decision.relevance,
            "threshold": decision.threshold,
            "k": ns.k,
            "relevance_source": decision.relevance_source,
            "latency_ms": (perf_counter() - started) * 1000.0,
        }


def _task_view(task: AnnotationTask, done: int, total: int) -> dict[str, Any]:
    return {
        "task_id": task.task_id,
        "query_text": task.query_text,
        "example_text": task.example_text,
        "task_description": task.task_description,
        "dataset": task.dataset,
        "k": task.k,
        "progress": {"done": done, "total": total},
    }


def create_app(
    config: ExperimentConfig,
    llm_backend: ChatBackend | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="iclkit annotation service")
    store = AnnotationStore(config.out_dir)
    classify_ctx = ClassifyContext(config, llm_backend=llm_backend)
    app.state.store = store

    @app.get("/tasks")
    def get_tasks(annotator: str = "") -> JSONResponse:
        if not annotator:
            return JSONResponse(status_code=400, content={"reason": "annotator is required"})
        mine = store.tasks_for(annotator)
        if not mine:
            return JSONResponse(
                status_code=404, content={"reason": f"no tasks for annotator {annotator!r}"}
            )
        pending = store.pending_for(annotator)
        done = len(mine) - len(pending)
        next_task = pending[0] if pending else None
        return JSONResponse(
            content={
                "annotator": annotator,
                "next": _task_view(next_task, done, len(mine)) if next_task else None,
                "pending_ids": [t.task_id for t in pending],
                "done": done,
                "total": len(mine),
            }
        )

    @app.post("/judgments")
    async def post_judgment(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse(status_code=400, content={"reason": "body must be JSON"})
        if not isinstance(body, dict):
            return JSONResponse(status_code=400, content={"reason": "body must be an object"})
        task_id = body.get("task_id")
        relevant = body.get("relevant")
        if not isinstance(task_id, str) or not task_id:
            return JSONResponse(status_code=400, content={"reason": "task_id is required"})
        if not isinstance(relevant, bool):
            return JSONResponse(
                status_code=400, content={"reason": "relevant must be true or false"}
            )
        try:
            task, warning = store.submit(task_id, relevant)
        except KeyError:
            return JSONResponse(
                status_code=404, content={"reason": f"unknown task {task_id!r}"}
            )
        mine = store.tasks_for(task.annotator_id)
        pending = store.pending_for(task.annotator_id)
        content: dict[str, Any] = {
            "status": "ok",
            "task_id": task_id,
            "done": len(mine) - len(pending),
            "total": len(mine),
        }
        if warning:
            content["warning"] = warning
        return JSONResponse(content=content)

    @app.get("/status")
    def get_status() -> JSONResponse:
        total = len(store.tasks)
        done = sum(1 for t in store.tasks if t.task_id in store.latest)
        cells = []
        for ds_cfg in config.datasets:
            for k in config.k_values:
                path = cell_record_path(config.out_dir, ds_cfg.name, k)
                n = len(load_cell_records(path)) if path.exists() else 0
                cells.append({"dataset": ds_cfg.name, "k": k, "n_records": n})
        return JSONResponse(
            content={
                "total": total,
                "done": done,
                "pending": total - done,
                "relevance": store.running_relevance(),
                "cells": cells,
            }
        )

    @app.post("/classify")
    async def post_classify(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse(status_code=400, content={"reason": "body must be JSON"})
        if not isinstance(body, dict) or not isinstance(body.get("text"), str) or not body["text"]:
            return JSONResponse(status_code=400, content={"reason": "text is required"})
        k = body.get("k", max(config.k_values))
        threshold = body.get("threshold", config.router_threshold)
        if not isinstance(k, int) or k < 1:
            return JSONResponse(status_code=400, content={"reason": "k must be a positive integer"})
        if not isinstance(threshold, (int, float)):
            return JSONResponse(status_code=400, content={"reason": "threshold must be a number"})
        try:
            classify_ctx.ensure()
            result = classify_ctx.classify(body["text"], k, float(threshold))
        except (EmbeddingError, RetrievalError, FileNotFoundError) as exc:
            return JSONResponse(status_code=409, content={"reason": str(exc)})
        except QueryFailed as exc:
            return JSONResponse(status_code=502, content={"reason": str(exc)})
        return JSONResponse(content=result)

    mount_dir = _resolve_ui_dir(ui_dir)
    if mount_dir is not None:
        app.mount("/", StaticFiles(directory=mount_dir, html=True), name="ui")
    else:

        @app.get("/")
        def root() -> JSONResponse:
            return JSONResponse(
                content={
                    "service": "iclkit",
                    "endpoints": ["/tasks", "/judgments", "/status", "/classify"],
                    "ui": "not built; see frontend/README.md",
                }
            )

    return app


def _resolve_ui_dir(ui_dir: str | Path | None) -> Path | None:
    candidates = []
    if ui_dir is not None:
        candidates.append(Path(ui_dir))
    else:
        candidates.append(Path("frontend") / "dist")
        # src/iclkit/harness/service.py -> repo root is three levels up
        candidates.append(Path(__file__).resolve().parents[3] / "frontend" / "dist")
    for c in candidates:
        if c.is_dir() and (c / "index.html").exists():
            return c
    return None


def serve(
    config: ExperimentConfig,
    host: str = "127.0.0.1",
    port: int = 8000,
    llm_backend: ChatBackend | None = None,
    ui_dir: str | Path | None = None,
) -> None:
    import uvicorn

    app = create_app(config, llm_backend=llm_backend, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)
