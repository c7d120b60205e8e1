"""Experiment runner: dataset x k sweep with per-query resumability.

Each (dataset, k) cell appends line-delimited records to its own file; a
query already recorded is skipped on resume, so an interrupted sweep picks
up where it stopped and produces the same artifacts as a clean run. The
manifest binds every record file to the config digest; mismatching digests
abort before any work rather than silently mixing configurations.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter
from typing import Callable

from ..analysis import RelevanceScore, relevance_score
from ..classifiers import Prediction, knn_predict, lr_on_topk
from ..corpus import Dataset, Example, load_dataset, sample_test
from ..embedding import HashingEmbedder, RemoteEmbeddingProvider, embed_corpus
from ..llm import (
    AnnotationFailed,
    ChatBackend,
    HttpChatBackend,
    LlmClient,
    QueryFailed,
    RelevanceVerdict,
    ScriptedChatBackend,
    TokenBucket,
    build_icl_prompt,
    build_zero_shot_prompt,
    fixed_label_script,
    follower_script,
    llm_annotate_relevance,
    llm_predict,
    majority_echo_script,
    overlap_annotator_script,
    planted_verdict_annotator_script,
)
from ..retrieval import NeighborSet, index_build
from ..router import RouterAuditLog, proxy_relevance, route
from .config import AnnotatorConfig, ConfigError, EmbedderConfig, ExperimentConfig, LlmConfig, config_digest

log = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1

_MODE_BY_TAG = {"llm": "plain", "llm_weighted": "weighted", "llm_zeroshot": "zeroshot"}


def parse_behavior(behavior: str) -> Callable:
    """Resolve a scripted-behavior spec string to its message function.

    Specs: majority_echo | fixed:<label> | follower:<p>:<prior>[:<salt>] |
    overlap:<threshold> | planted:<p>[:<salt>].
    """
    head, _, rest = behavior.partition(":")
    if head == "majority_echo":
        return majority_echo_script
    if head == "fixed":
        if not rest:
            raise ConfigError("fixed behavior needs a label: fixed:<label>")
        return fixed_label_script(rest)
    if head == "follower":
        parts = rest.split(":")
        if len(parts) < 2:
            raise ConfigError("follower behavior needs follower:<p>:<prior>[:<salt>]")
        salt = parts[2] if len(parts) > 2 else ""
        return follower_script(float(parts[0]), parts[1], salt)
    if head == "overlap":
        return overlap_annotator_script(float(rest) if rest else 0.5)
    if head == "planted":
        parts = rest.split(":")
        salt = parts[1] if len(parts) > 1 else ""
        return planted_verdict_annotator_script(float(parts[0]), salt)
    raise ConfigError(f"unknown scripted behavior {behavior!r}")


def build_backend(kind: str, behavior: str, url: str | None, auth_env: str | None) -> ChatBackend:
    if kind == "scripted":
        return ScriptedChatBackend(parse_behavior(behavior))
    if kind == "http":
        if not url:
            raise ConfigError("http chat backend needs a url")
        return HttpChatBackend(url, auth_env=auth_env)
    raise ConfigError(f"unknown backend kind {kind!r}")


def build_llm_client(cfg: LlmConfig, backend: ChatBackend | None = None) -> LlmClient:
    if backend is None:
        backend = build_backend(cfg.kind, cfg.behavior, cfg.url, cfg.auth_env)
    limiter = TokenBucket(cfg.rate_per_s) if cfg.rate_per_s else None
    return LlmClient(
        backend, model=cfg.model, max_attempts=cfg.max_attempts, rate_limiter=limiter
    )


def build_annotator_client(cfg: AnnotatorConfig, backend: ChatBackend | None = None) -> LlmClient:
    if backend is None:
        backend = build_backend(cfg.kind, cfg.behavior, cfg.url, cfg.auth_env)
    return LlmClient(backend, model=cfg.model)


def build_embedder(cfg: EmbedderConfig):
    if cfg.kind == "hash":
        return HashingEmbedder(dims=cfg.dims, seed=cfg.seed)
    if cfg.kind == "remote":
        if not cfg.url:
            raise ConfigError("remote embedder needs a url")
        token = os.environ.get(cfg.auth_env) if cfg.auth_env else None
        return RemoteEmbeddingProvider(
            url=cfg.url,
            dims=cfg.dims,
            provider_id=cfg.provider_id or f"remote-d{cfg.dims}",
            auth_token=token,
        )
    raise ConfigError(f"unknown embedder kind {cfg.kind!r}")


def cell_record_path(out_dir: str | Path, dataset_name: str, k: int) -> Path:
    return Path(out_dir) / "records" / f"{dataset_name}-k{k}.jsonl"


def repair_jsonl(path: Path) -> None:
    """Drop a torn trailing line (no final newline) left by an interrupt, so
    the next append starts on a clean line."""
    if not path.exists():
        return
    data = path.read_bytes()
    if not data or data.endswith(b"\n"):
        return
    cut = data.rfind(b"\n")
    with path.open("r+b") as fh:
        fh.truncate(cut + 1 if cut >= 0 else 0)


def load_cell_records(path: Path) -> list[dict]:
    if not path.exists():
        return []
    repair_jsonl(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no} corrupt record: {exc}") from exc
    return records


def write_manifest(out_dir: Path, config: ExperimentConfig, digest: str) -> None:
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        existing = json.loads(manifest_path.read_text(encoding="utf-8"))
        if existing.get("config_digest") != digest:
            raise ConfigError(
                f"run directory {out_dir} belongs to config digest "
                f"{existing.get('config_digest')}, current config digests to {digest}; "
                "refusing to mix records"
            )
        return
    payload = {
        "schema_version": RECORD_SCHEMA_VERSION,
        "config_digest": digest,
        "config": dataclasses.asdict(config),
        "datasets": [d.name for d in config.datasets],
        "k_values": list(config.k_values),
        "models": list(config.predictor_tags()),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class CellSummary:
    dataset: str
    k: int
    n_queries: int = 0
    n_skipped: int = 0
    n_prediction_failures: int = 0
    n_annotation_failures: int = 0


@dataclass
class RunSummary:
    out_dir: str
    config_digest: str
    cells: list[CellSummary] = field(default_factory=list)

    @property
    def total_failures(self) -> int:
        return sum(c.n_prediction_failures + c.n_annotation_failures for c in self.cells)


class _CellWriter:
    """Single writer per cell file; appends are serialized and flushed."""

    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        repair_jsonl(path)
        self._fh = path.open("a", encoding="utf-8")
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True)
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _predict_one(
    tag: str,
    ns: NeighborSet,
    query: Example,
    dataset: Dataset,
    llm_client: LlmClient | None,
) -> Prediction:
    if tag == "knn":
        return knn_predict(ns, weighted=False)
    if tag == "wknn":
        return knn_predict(ns, weighted=True)
    if tag == "lr":
        return lr_on_topk(ns, query.text, label_space=dataset.label_space)
    mode = _MODE_BY_TAG.get(tag)
    if mode is None:
        raise ConfigError(f"unknown predictor tag {tag!r}")
    if llm_client is None:
        raise ConfigError(f"predictor {tag!r} requires an LLM client")
    if mode == "zeroshot":
        prompt = build_zero_shot_prompt(query, dataset.label_space)
    else:
        prompt = build_icl_prompt(ns, query, dataset.label_space, mode=mode)
    return llm_predict(llm_client, prompt)


def _run_query(
    config: ExperimentConfig,
    dataset: Dataset,
    task_description: str,
    k: int,
    query: Example,
    ns: NeighborSet,
    tags: tuple[str, ...],
    llm_client: LlmClient | None,
    annotator_clients: list[tuple[AnnotatorConfig, LlmClient]],
    audit: RouterAuditLog,
    digest: str,
) -> dict:
    started = perf_counter()
    predictions: dict[str, str] = {}
    failures: dict[str, str] = {}
    verdicts: list[RelevanceVerdict] = []
    relevance: dict[str, float | None] = {}
    annotation_failures = 0

    for cfg, client in annotator_clients:
        judged: list[RelevanceVerdict] = []
        failed = False
        for neighbor in ns.neighbors:
            try:
                judged.append(
                    llm_annotate_relevance(client, query, neighbor, task_description)
                )
            except AnnotationFailed as exc:
                log.warning("annotation failed: %s", exc)
                annotation_failures += 1
                failed = True
        verdicts.extend(judged)
        if failed or len(judged) != ns.k:
            relevance[cfg.annotator_id] = None
        else:
            relevance[cfg.annotator_id] = relevance_score(judged, ns.k).score

    router_info: dict | None = None
    for tag in tags:
        if tag == "router":
            rel = _router_relevance(ns, annotator_clients, relevance)
            try:
                decision = route(
                    query,
                    ns,
                    rel,
                    config.router_threshold,
                    config.router_knn_mode,
                    llm_client,
                    dataset.label_space,
                    audit=audit,
                )
            except QueryFailed as exc:
                failures[tag] = exc.reason
                continue
            predictions[tag] = decision.prediction.label
            router_info = {
                "route": decision.route,
                "relevance": decision.relevance,
                "threshold": decision.threshold,
                "source": decision.relevance_source,
            }
            continue
        try:
            predictions[tag] = _predict_one(tag, ns, query, dataset, llm_client).label
        except QueryFailed as exc:
            failures[tag] = exc.reason

    record = {
        "schema_version": RECORD_SCHEMA_VERSION,
        "config_digest": digest,
        "dataset": dataset.name,
        "k": k,
        "query_id": query.id,
        "gold": query.label,
        "neighbors": [[n.example_id, n.similarity] for n in ns.neighbors],
        "neighbor_digest": ns.digest(),
        "predictions": predictions,
        "prediction_failures": failures,
        "relevance": relevance,
        "verdicts": [[v.example_id, v.annotator_id, v.relevant] for v in verdicts],
        "router": router_info,
        "elapsed_ms": (perf_counter() - started) * 1000.0,
        "n_annotation_failures": annotation_failures,
    }
    return record


def _router_relevance(
    ns: NeighborSet,
    annotator_clients: list[tuple[AnnotatorConfig, LlmClient]],
    relevance: dict[str, float | None],
) -> RelevanceScore:
    """Annotator-backed relevance when available, proxy otherwise."""
    if annotator_clients:
        cfg, _ = annotator_clients[0]
        score = relevance.get(cfg.annotator_id)
        if score is not None:
            return RelevanceScore(
                query_id=ns.query_id, k=ns.k, annotator=cfg.annotator_id, score=score
            )
    return proxy_relevance(ns)


def run_experiment(
    config: ExperimentConfig,
    llm_backend: ChatBackend | None = None,
    annotator_backends: dict[str, ChatBackend] | None = None,
    record_hook: Callable[[str, dict], None] | None = None,
) -> RunSummary:
    """Run the full sweep; every (dataset, k) cell is resumable per query.

    `llm_backend` / `annotator_backends` override the config-built backends
    (tests inject scripted ones directly). `record_hook(cell_key, record)`
    fires after each append; raising from it interrupts the run exactly at a
    record boundary.
    """
    digest = config_digest(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir, config, digest)

    tags = config.predictor_tags()
    llm_client = None
    if config.needs_llm():
        llm_client = build_llm_client(config.llm, backend=llm_backend)
    annotator_clients = [
        (
            cfg,
            build_annotator_client(
                cfg, backend=(annotator_backends or {}).get(cfg.model)
            ),
        )
        for cfg in config.annotators
    ]
    audit = RouterAuditLog(out_dir / "router-audit.jsonl")
    provider = build_embedder(config.embedder)

    summary = RunSummary(out_dir=str(out_dir), config_digest=digest)
    for ds_cfg in config.datasets:
        dataset = load_dataset(
            ds_cfg.path, ds_cfg.format, name=ds_cfg.name, labels=ds_cfg.labels
        )
        cache_path = out_dir / "cache" / f"{ds_cfg.name}.{provider.provider_id}.vec"
        cache = embed_corpus(
            provider, dataset, cache_path, workers=max(1, config.workers)
        )
        index = index_build(cache, dataset)
        sample = sample_test(dataset, config.sample_n, config.sample_seed)
        by_id = dataset.examples_by_id

        for k in config.k_values:
            cell = CellSummary(dataset=ds_cfg.name, k=k)
            summary.cells.append(cell)
            path = cell_record_path(out_dir, ds_cfg.name, k)
            done = {r["query_id"] for r in load_cell_records(path)}
            writer = _CellWriter(path)
            cell_key = f"{ds_cfg.name}-k{k}"
            try:
                pending = [qid for qid in sample.example_ids if qid not in done]
                cell.n_skipped = len(sample.example_ids) - len(pending)

                def process(qid: str) -> dict:
                    query = by_id[qid]
                    ns = index.topk(qid, cache.vectors[qid], k)
                    return _run_query(
                        config, dataset, ds_cfg.task_description, k, query, ns, tags,
                        llm_client, annotator_clients, audit, digest,
                    )

                if config.workers > 1:
                    with ThreadPoolExecutor(max_workers=config.workers) as pool:
                        for record in pool.map(process, pending):
                            writer.append(record)
                            _tally(cell, record)
                            if record_hook is not None:
                                record_hook(cell_key, record)
                else:
                    for qid in pending:
                        record = process(qid)
                        writer.append(record)
                        _tally(cell, record)
                        if record_hook is not None:
                            record_hook(cell_key, record)
            finally:
                writer.close()
    return summary


def _tally(cell: CellSummary, record: dict) -> None:
    cell.n_queries += 1
    cell.n_prediction_failures += len(record["prediction_failures"])
    cell.n_annotation_failures += record["n_annotation_failures"]
