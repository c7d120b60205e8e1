"""
A full offline experiment: sweep, annotate, interrupt, resume, export
=====================================================================

Everything below runs against the hashing embedder and scripted chat
backends, so it needs no network and finishes in seconds.
"""

import json
import random
import tempfile
from pathlib import Path

from iclkit.harness import (
    AnnotatorConfig,
    DatasetConfig,
    EmbedderConfig,
    ExperimentConfig,
    export,
    make_annotation_batch,
    run_experiment,
)
from iclkit.harness.runner import cell_record_path, load_cell_records

work = Path(tempfile.mkdtemp())

# synthetic two-label corpus; each label owns its own vocabulary
rng = random.Random(0)
rows = []
for li, label in enumerate(["alpha", "beta"]):
    vocab = [f"w{li}t{j}" for j in range(10)]
    for i in range(40):
        split = "train" if i < 30 else "test"
        rows.append({
            "id": f"{label}-{i}",
            "text": " ".join(rng.choices(vocab, k=8)),
            "label": label,
            "split": split,
        })
data = work / "toy.jsonl"
data.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")

config = ExperimentConfig(
    datasets=(DatasetConfig(name="toy", path=str(data), labels=("alpha", "beta")),),
    sample_n=15,
    k_values=(1, 5),
    models=("knn", "wknn", "lr", "llm", "router"),
    annotators=(AnnotatorConfig(kind="scripted", behavior="overlap:0.2", model="judge"),),
    embedder=EmbedderConfig(kind="hash", dims=128),
    out_dir=str(work / "run"),
)

summary = run_experiment(config)
print("config digest:", summary.config_digest[:16], "...")
for cell in summary.cells:
    print(f"  {cell.dataset} k={cell.k}: ran {cell.n_queries}, skipped {cell.n_skipped}")

# a second invocation skips everything already recorded
resumed = run_experiment(config)
print("resume skipped per cell:", [c.n_skipped for c in resumed.cells])

records = load_cell_records(cell_record_path(config.out_dir, "toy", 5))
first = records[0]
print("record keys:", sorted(first)[:7], "...")
print("one prediction set:", first["predictions"])
print("relevance:", first["relevance"], " route:", first["router"]["route"])

# sample queries into human-annotation tasks: n x (k1 + k2 + ...) of them
tasks = make_annotation_batch(config, n_queries=3, seed=1, ks=[1, 5], annotator_id="demo")
print("annotation tasks:", len(tasks), "=", "3 x (1 + 5)")

reports = export(config.out_dir, what="all", format="csv")
print("reports written:")
for path in reports:
    print("  ", path.name, f"({path.stat().st_size} bytes)")
print("\naccuracy.csv head:")
for line in (Path(config.out_dir) / "reports" / "accuracy.csv").read_text().splitlines()[:4]:
    print("  ", line)
