"""Labeled text datasets: loading, label spaces, and seeded test sampling."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class DatasetError(ValueError):
    """Raised for malformed dataset files or records."""


@dataclass(frozen=True)
class Example:
    """One labeled text instance."""

    id: str
    text: str
    label: str


@dataclass(frozen=True)
class LabelSpace:
    """Ordered, duplicate-free set of class labels.

    The order is fixed for the lifetime of a run; contingency matrices and
    prompt label listings index into it.
    """

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DatasetError(f"label space needs >=2 labels, got {list(self.labels)}")
        if len(set(self.labels)) != len(self.labels):
            raise DatasetError(f"duplicate labels in label space: {list(self.labels)}")

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class Dataset:
    name: str
    train: tuple[Example, ...]
    test: tuple[Example, ...]
    label_space: LabelSpace

    def __post_init__(self):
        train_ids = {e.id for e in self.train}
        test_ids = {e.id for e in self.test}
        overlap = train_ids & test_ids
        if overlap:
            raise DatasetError(f"train/test ids overlap: {sorted(overlap)[:5]}")
        for ex in self.train + self.test:
            if ex.label not in self.label_space:
                raise DatasetError(f"example {ex.id!r} has label {ex.label!r} outside label space")

    @property
    def examples_by_id(self) -> dict[str, Example]:
        return {e.id: e for e in self.train + self.test}


@dataclass(frozen=True)
class SplitSample:
    """Seeded, reproducible subsample of a dataset's test ids."""

    dataset_name: str
    seed: int
    example_ids: tuple[str, ...]


def _records_from_csv(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "text" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise DatasetError(f"{path}: csv header must include 'text' and 'label'")
        for i, row in enumerate(reader, start=2):  # header is line 1
            yield i, row


def _records_from_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{i} invalid JSON: {e.msg}") from e
            if not isinstance(row, dict):
                raise DatasetError(f"{path}:{i} record must be an object")
            yield i, row


def load_dataset(
    path: str | Path,
    format: str,
    name: str | None = None,
    labels: Sequence[str] | None = None,
) -> Dataset:
    """Load a dataset from a csv or jsonl file.

    Each record carries `text` and `label`; `id` is optional and defaults to
    the row index; an optional `split` of "train" or "test" assigns the
    partition (records without one go to train). The label space is inferred
    lexicographically from observed labels unless an explicit `labels`
    manifest fixes the order.
    """
    p = Path(path)
    if format == "csv":
        records = _records_from_csv(p)
    elif format == "jsonl":
        records = _records_from_jsonl(p)
    else:
        raise DatasetError(f"unknown format {format!r}: expected 'csv' or 'jsonl'")
    if not p.exists():
        raise DatasetError(f"dataset file not found: {p}")

    train: list[Example] = []
    test: list[Example] = []
    seen_ids: set[str] = set()
    observed_labels: set[str] = set()
    for line_no, row in records:
        text = row.get("text")
        label = row.get("label")
        if text is None or str(text) == "":
            raise DatasetError(f"{p}:{line_no} missing or empty 'text'")
        if label is None or str(label) == "":
            raise DatasetError(f"{p}:{line_no} missing or empty 'label'")
        ex_id = str(row["id"]) if row.get("id") not in (None, "") else str(line_no - 1)
        if ex_id in seen_ids:
            raise DatasetError(f"{p}:{line_no} duplicate example id {ex_id!r}")
        seen_ids.add(ex_id)
        observed_labels.add(str(label))
        split = str(row.get("split") or "train")
        ex = Example(id=ex_id, text=str(text), label=str(label))
        if split == "train":
            train.append(ex)
        elif split == "test":
            test.append(ex)
        else:
            raise DatasetError(f"{p}:{line_no} split must be 'train' or 'test', got {split!r}")

    if labels is not None:
        unknown = observed_labels - set(labels)
        if unknown:
            raise DatasetError(f"{p}: labels {sorted(unknown)} not in supplied manifest")
        space = LabelSpace(tuple(labels))
    else:
        space = LabelSpace(tuple(sorted(observed_labels)))
    return Dataset(
        name=name or p.stem,
        train=tuple(train),
        test=tuple(test),
        label_space=space,
    )


def export_dataset(dataset: Dataset, path: str | Path, format: str) -> None:
    """Write a dataset back out; round-trips record-equivalently with load_dataset."""
    p = Path(path)
    rows = [
        {"id": e.id, "text": e.text, "label": e.label, "split": split}
        for split, part in (("train", dataset.train), ("test", dataset.test))
        for e in part
    ]
    if format == "csv":
        with p.open("w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["id", "text", "label", "split"])
            writer.writeheader()
            writer.writerows(rows)
    elif format == "jsonl":
        with p.open("w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row, ensure_ascii=False) + "\n")
    else:
        raise DatasetError(f"unknown format {format!r}: expected 'csv' or 'jsonl'")


def sample_test(dataset: Dataset, n: int, seed: int) -> SplitSample:
    """Draw min(n, |test|) test ids without replacement, seeded.

    A pure function of (dataset identity, n, seed): the same call always
    returns the same id sequence. When n covers the whole test split, ids
    come back in stored order.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    test_ids = [e.id for e in dataset.test]
    if n >= len(test_ids):
        chosen = test_ids
    else:
        chosen = random.Random(seed).sample(test_ids, n)
    return SplitSample(dataset_name=dataset.name, seed=seed, example_ids=tuple(chosen))
