"""Report computation and export from a run directory.

Exports are pure functions of the stored records: rows are fully sorted,
floats rendered via repr, and no timestamps appear anywhere, so re-exporting
an unchanged run (or an interrupted-then-resumed one) reproduces identical
bytes. Undefined statistics export as NA / null, never as silent zeros.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..analysis import (
    AccuracyReport,
    accuracy,
    accuracy_diff_grid,
    cohen_kappa,
    contingency,
    pearson,
)
from ..classifiers import Prediction
from .annotation import HumanJudgment, load_judgments
from .runner import load_cell_records

REPORT_SCHEMA_VERSION = 1

EXPORT_KINDS = ("accuracy", "kappa", "contingency", "correlation", "grid")


class ExportError(RuntimeError):
    pass


@dataclass
class CellData:
    dataset: str
    k: int
    gold: dict[str, str] = field(default_factory=dict)
    predictions: dict[str, dict[str, str]] = field(default_factory=dict)
    failure_counts: dict[str, int] = field(default_factory=dict)
    relevance: dict[str, dict[str, float]] = field(default_factory=dict)
    verdict_pairs: dict[str, dict[tuple[str, str], bool]] = field(default_factory=dict)

    def models(self) -> list[str]:
        return sorted(set(self.predictions) | set(self.failure_counts))

    def preds_for(self, model: str) -> list[Prediction]:
        by_query = self.predictions.get(model, {})
        return [
            Prediction(query_id=qid, label=label, model=model)
            for qid, label in sorted(by_query.items())
        ]

    def annotators(self) -> list[str]:
        return sorted(self.relevance)


@dataclass
class RunData:
    out_dir: Path
    manifest: dict
    cells: dict[tuple[str, int], CellData]

    def labels_for(self, dataset: str) -> tuple[str, ...]:
        for ds in self.manifest.get("config", {}).get("datasets", []):
            if ds.get("name") == dataset and ds.get("labels"):
                return tuple(ds["labels"])
        observed: set[str] = set()
        for (name, _), cell in self.cells.items():
            if name != dataset:
                continue
            observed.update(cell.gold.values())
            for preds in cell.predictions.values():
                observed.update(preds.values())
        return tuple(sorted(observed))

    def datasets(self) -> list[str]:
        return sorted({name for name, _ in self.cells})

    def k_values(self) -> list[int]:
        return sorted({k for _, k in self.cells})


def load_run(out_dir: str | Path) -> RunData:
    """Assemble all record files plus ingested human judgments into one view."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ExportError(f"no manifest at {manifest_path}; not a run directory")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    cells: dict[tuple[str, int], CellData] = {}
    records_dir = out / "records"
    for path in sorted(records_dir.glob("*.jsonl")) if records_dir.exists() else []:
        for r in load_cell_records(path):
            key = (r["dataset"], r["k"])
            cell = cells.setdefault(key, CellData(dataset=r["dataset"], k=r["k"]))
            qid = r["query_id"]
            cell.gold[qid] = r["gold"]
            for model, label in r["predictions"].items():
                cell.predictions.setdefault(model, {})[qid] = label
            for model in r["prediction_failures"]:
                cell.failure_counts[model] = cell.failure_counts.get(model, 0) + 1
            for annotator, score in r["relevance"].items():
                if score is not None:
                    cell.relevance.setdefault(annotator, {})[qid] = score
            for example_id, annotator, relevant in r["verdicts"]:
                cell.verdict_pairs.setdefault(annotator, {})[(qid, example_id)] = relevant
    if not cells:
        raise ExportError(f"no records under {records_dir}")

    annotations_dir = out / "annotations"
    if annotations_dir.exists():
        for path in sorted(annotations_dir.glob("judgments-*.jsonl")):
            _merge_human_judgments(cells, load_judgments(path))
    return RunData(out_dir=out, manifest=manifest, cells=cells)


def _merge_human_judgments(
    cells: dict[tuple[str, int], CellData], judgments: Sequence[HumanJudgment]
) -> None:
    """Fold human verdicts into their cells; a query's relevance score exists
    only once all k of its judgments are in."""
    grouped: dict[tuple[str, int, str, str], list[HumanJudgment]] = {}
    for j in judgments:
        grouped.setdefault((j.dataset, j.k, j.annotator_id, j.query_id), []).append(j)
    for (dataset, k, annotator, qid), group in grouped.items():
        key = (dataset, k)
        if key not in cells:
            continue
        cell = cells[key]
        tag = f"human:{annotator}"
        pairs = cell.verdict_pairs.setdefault(tag, {})
        for j in group:
            pairs[(qid, j.example_id)] = j.relevant
        judged = {j.example_id: j.relevant for j in group}
        if len(judged) == k:
            score = sum(1 for v in judged.values() if v) / k
            cell.relevance.setdefault(tag, {})[qid] = score


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def accuracy_rows(run: RunData) -> list[dict]:
    rows = []
    for (dataset, k) in sorted(run.cells):
        cell = run.cells[(dataset, k)]
        for model in cell.models():
            report: AccuracyReport = accuracy(
                cell.preds_for(model), cell.gold, excluded=cell.failure_counts.get(model, 0)
            )
            rows.append(
                {
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "dataset": dataset,
                    "k": k,
                    "model": model,
                    "accuracy": report.value,
                    "n_valid": report.n_valid,
                    "n_excluded": report.n_excluded,
                }
            )
    return rows


def kappa_rows(run: RunData) -> list[dict]:
    rows = []
    for (dataset, k) in sorted(run.cells):
        cell = run.cells[(dataset, k)]
        labels = run.labels_for(dataset)
        models = cell.models()
        for i, model_a in enumerate(models):
            for model_b in models[i + 1 :]:
                matrix = contingency(cell.preds_for(model_a), cell.preds_for(model_b), labels)
                base = {
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "dataset": dataset,
                    "k": k,
                    "model_a": model_a,
                    "model_b": model_b,
                    "n": matrix.n,
                }
                if matrix.n == 0:
                    rows.append(base | {"kappa": None, "p_o": None, "p_e": None, "degenerate": False})
                    continue
                report = cohen_kappa(matrix)
                rows.append(
                    base
                    | {
                        "kappa": report.kappa,
                        "p_o": report.p_o,
                        "p_e": report.p_e,
                        "degenerate": report.degenerate,
                    }
                )
    return rows


def contingency_rows(run: RunData) -> list[dict]:
    rows = []
    for (dataset, k) in sorted(run.cells):
        cell = run.cells[(dataset, k)]
        labels = run.labels_for(dataset)
        models = cell.models()
        for i, model_a in enumerate(models):
            for model_b in models[i + 1 :]:
                matrix = contingency(cell.preds_for(model_a), cell.preds_for(model_b), labels)
                for la, row in zip(matrix.labels, matrix.counts):
                    for lb, count in zip(matrix.labels, row):
                        rows.append(
                            {
                                "schema_version": REPORT_SCHEMA_VERSION,
                                "dataset": dataset,
                                "k": k,
                                "model_a": model_a,
                                "model_b": model_b,
                                "label_a": la,
                                "label_b": lb,
                                "count": count,
                            }
                        )
    return rows


def mean_relevance(cell: CellData, annotator: str) -> float | None:
    scores = cell.relevance.get(annotator)
    if not scores:
        return None
    return sum(scores.values()) / len(scores)


def correlation_rows(run: RunData) -> list[dict]:
    """Per (k, annotator, model pair): Pearson r between per-dataset mean
    relevance and per-dataset kappa, across the datasets where both exist."""
    kappa_by_key: dict[tuple[str, int, str, str], float | None] = {}
    pair_set: set[tuple[str, str]] = set()
    for row in kappa_rows(run):
        kappa_by_key[(row["dataset"], row["k"], row["model_a"], row["model_b"])] = row["kappa"]
        pair_set.add((row["model_a"], row["model_b"]))

    annotators = sorted({a for cell in run.cells.values() for a in cell.annotators()})
    rows = []
    for k in run.k_values():
        for annotator in annotators:
            for model_a, model_b in sorted(pair_set):
                xs, ys, used = [], [], []
                for dataset in run.datasets():
                    cell = run.cells.get((dataset, k))
                    if cell is None:
                        continue
                    rel = mean_relevance(cell, annotator)
                    kap = kappa_by_key.get((dataset, k, model_a, model_b))
                    if rel is None or kap is None:
                        continue
                    xs.append(rel)
                    ys.append(kap)
                    used.append(dataset)
                base = {
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "k": k,
                    "annotator": annotator,
                    "model_a": model_a,
                    "model_b": model_b,
                    "n_datasets": len(used),
                }
                if len(used) < 2:
                    rows.append(base | {"r": None, "r_squared": None, "undefined": True})
                    continue
                report = pearson(xs, ys)
                rows.append(
                    base
                    | {"r": report.r, "r_squared": report.r_squared, "undefined": report.undefined}
                )
    return rows


def grid_rows(run: RunData) -> list[dict]:
    acc_by_key: dict[tuple[str, int, str], float | None] = {}
    for row in accuracy_rows(run):
        acc_by_key[(row["dataset"], row["k"], row["model"])] = row["accuracy"]
    grid_input = {}
    for (dataset, k) in sorted(run.cells):
        models = run.cells[(dataset, k)].models()
        for i, model_a in enumerate(models):
            for model_b in models[i + 1 :]:
                grid_input[(dataset, k, model_a, model_b)] = (
                    acc_by_key.get((dataset, k, model_a)),
                    acc_by_key.get((dataset, k, model_b)),
                )
    return [
        {
            "schema_version": REPORT_SCHEMA_VERSION,
            "dataset": cell.dataset,
            "k": cell.k,
            "model_a": cell.model_a,
            "model_b": cell.model_b,
            "diff": cell.diff,
            "hole": cell.hole,
        }
        for cell in accuracy_diff_grid(grid_input)
    ]


_ROW_BUILDERS = {
    "accuracy": accuracy_rows,
    "kappa": kappa_rows,
    "contingency": contingency_rows,
    "correlation": correlation_rows,
    "grid": grid_rows,
}


def _write_csv(rows: list[dict], path: Path) -> None:
    header = list(rows[0].keys()) if rows else ["schema_version"]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in header])


def _write_jsonl(rows: list[dict], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def export(out_dir: str | Path, what: str = "all", format: str = "both") -> list[Path]:
    """Write the requested report files under <run>/reports and return them."""
    if what != "all" and what not in EXPORT_KINDS:
        raise ExportError(f"unknown report {what!r}; valid: {EXPORT_KINDS + ('all',)}")
    if format not in ("csv", "jsonl", "both"):
        raise ExportError(f"unknown format {format!r}; valid: csv, jsonl, both")
    run = load_run(out_dir)
    kinds = EXPORT_KINDS if what == "all" else (what,)
    reports_dir = Path(out_dir) / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in kinds:
        rows = _ROW_BUILDERS[kind](run)
        if format in ("csv", "both"):
            path = reports_dir / f"{kind}.csv"
            _write_csv(rows, path)
            written.append(path)
        if format in ("jsonl", "both"):
            path = reports_dir / f"{kind}.jsonl"
            _write_jsonl(rows, path)
            written.append(path)
    return written
