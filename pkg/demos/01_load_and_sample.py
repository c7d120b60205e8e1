"""
Loading a corpus and sampling an evaluation set
===============================================
"""

import json
import tempfile
from pathlib import Path

from iclkit import load_dataset, sample_test

# a tiny sentiment corpus; the split field routes rows to train or test
rows = [
    {"id": "t0", "text": "great plot and acting", "label": "Positive", "split": "train"},
    {"id": "t1", "text": "dull and far too long", "label": "Negative", "split": "train"},
    {"id": "t2", "text": "the acting carries it", "label": "Positive", "split": "train"},
    {"id": "t3", "text": "long dull stretches", "label": "Negative", "split": "train"},
    {"id": "q0", "text": "a great watch", "label": "Positive", "split": "test"},
    {"id": "q1", "text": "too long by an hour", "label": "Negative", "split": "test"},
    {"id": "q2", "text": "plot was dull", "label": "Negative", "split": "test"},
]

path = Path(tempfile.mkdtemp()) / "toy.jsonl"
path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")

dataset = load_dataset(path, "jsonl", name="toy", labels=("Positive", "Negative"))
print("dataset:", dataset.name)
print("labels:", dataset.label_space.labels)
print("train size:", len(dataset.train), " test size:", len(dataset.test))

# seeded sampling is reproducible; asking for more than exists keeps stored order
sample = sample_test(dataset, n=2, seed=7)
print("sampled query ids:", sample.example_ids)
print("same seed again:  ", sample_test(dataset, n=2, seed=7).example_ids)
print("whole test split: ", sample_test(dataset, n=10, seed=7).example_ids)
