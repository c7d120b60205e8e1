"""Shared builders: clustered synthetic corpora, NeighborSet literals, configs.

The cluster corpora give each label its own disjoint token vocabulary, so the
hashing embedder puts same-label texts close together and cross-label texts
near-orthogonal. That is what makes neighborhoods label-pure enough for the
end-to-end determinism checks.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from iclkit import Neighbor, NeighborSet
from iclkit.harness import (
    AnnotatorConfig,
    DatasetConfig,
    EmbedderConfig,
    ExperimentConfig,
    LlmConfig,
)


def cluster_rows(
    labels: tuple[str, ...],
    n_train_per: int,
    n_test_per: int,
    *,
    vocab_per_label: int = 10,
    text_len: int = 8,
    seed: int = 0,
    namespace: str = "",
) -> list[dict]:
    """Rows for a synthetic dataset whose labels own disjoint vocabularies."""
    rng = random.Random(seed)
    rows = []
    for li, label in enumerate(labels):
        vocab = [f"{namespace}w{li}t{j}" for j in range(vocab_per_label)]
        for i in range(n_train_per):
            rows.append(
                {
                    "id": f"{namespace}tr{li}-{i}",
                    "text": " ".join(rng.choices(vocab, k=text_len)),
                    "label": label,
                    "split": "train",
                }
            )
        for i in range(n_test_per):
            rows.append(
                {
                    "id": f"{namespace}te{li}-{i}",
                    "text": " ".join(rng.choices(vocab, k=text_len)),
                    "label": label,
                    "split": "test",
                }
            )
    return rows


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


def cluster_dataset_file(
    dir_path: Path,
    name: str,
    labels: tuple[str, ...],
    n_train_per: int,
    n_test_per: int,
    **kwargs,
) -> Path:
    rows = cluster_rows(labels, n_train_per, n_test_per, **kwargs)
    return write_jsonl(dir_path / f"{name}.jsonl", rows)


def ns_of(items, query_id: str = "q", k: int | None = None) -> NeighborSet:
    """NeighborSet literal from (id, sim, label[, text]) tuples."""
    neighbors = []
    for item in items:
        ex_id, sim, label = item[0], item[1], item[2]
        text = item[3] if len(item) > 3 else f"text of {ex_id}"
        neighbors.append(Neighbor(example_id=ex_id, similarity=sim, label=label, text=text))
    return NeighborSet(query_id=query_id, k=k if k is not None else len(neighbors), neighbors=tuple(neighbors))


def small_experiment_config(
    tmp_path: Path,
    *,
    name: str = "mini",
    labels: tuple[str, ...] = ("alpha", "beta"),
    n_train_per: int = 30,
    n_test_per: int = 15,
    sample_n: int = 20,
    k_values: tuple[int, ...] = (1, 5),
    models: tuple[str, ...] = ("knn", "wknn", "lr"),
    prompt_modes: tuple[str, ...] = ("plain",),
    annotators: tuple[AnnotatorConfig, ...] = (),
    llm: LlmConfig | None = None,
    out_name: str = "run",
    dims: int = 128,
    router_threshold: float = 0.5,
    sample_seed: int = 0,
    workers: int = 1,
    data_seed: int = 0,
) -> ExperimentConfig:
    """One-dataset config over a freshly written cluster corpus."""
    data_path = cluster_dataset_file(
        tmp_path / "data", name, labels, n_train_per, n_test_per, seed=data_seed
    )
    return ExperimentConfig(
        datasets=(
            DatasetConfig(
                name=name,
                path=str(data_path),
                format="jsonl",
                labels=labels,
                task_description="classify synthetic cluster texts",
            ),
        ),
        sample_n=sample_n,
        sample_seed=sample_seed,
        k_values=k_values,
        models=models,
        prompt_modes=prompt_modes,
        annotators=annotators,
        router_threshold=router_threshold,
        embedder=EmbedderConfig(kind="hash", dims=dims, seed=0),
        llm=llm if llm is not None else LlmConfig(),
        out_dir=str(tmp_path / out_name),
        workers=workers,
    )
