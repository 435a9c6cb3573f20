"""
Building and checking a dataset
===============================

Datasets are JSON Lines files with a sibling manifest declaring the expected
statistics. Loading validates both.
"""

import tempfile
from pathlib import Path

from convrewrite import SyntheticProfile, TaskType, compute_stats, generate_synthetic, load_dataset, save_dataset
from convrewrite.fixtures import table1_dataset_path

print(compute_stats(load_dataset(table1_dataset_path())).format_table("table1"))

profile = SyntheticProfile(TaskType.TEXT_QA, 4, lengths=(5, 5, 5, 3), seed=1)
dataset = generate_synthetic(profile)
print(compute_stats(dataset).format_table("synthetic QA"))

with tempfile.TemporaryDirectory() as tmp:
    manifest = save_dataset(dataset, Path(tmp) / "qa.jsonl")
    print(manifest.read_text())
    assert load_dataset(manifest) == dataset
