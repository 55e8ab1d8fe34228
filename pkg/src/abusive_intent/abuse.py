"""Abusive-language ensemble assembly and the supervised abuse classifier.

Source files arrive in heterogeneous shapes (the public corpora use
different columns), so each source declares its field mapping. Labels
collapse to binary: any abusive subtype marks the record abusive. The
assembled ensemble is cleaned with the corpus rules and shuffled with a
recorded seed so composition is reproducible.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Segment, clean_text
from .errors import TrainingError
from .recurrent import ModelConfig, SequenceModel, TrainingExample, vectorize

logger = logging.getLogger(__name__)


@dataclass
class SourceSpec:
    name: str
    path: str
    format: str = "jsonl"  # jsonl | csv
    text_field: str = "text"
    label_fields: Sequence[str] = ("label",)
    positive_values: Sequence[str] = ("1", "true", "abusive")


@dataclass
class AbuseRecord:
    text: str
    label: int  # 1 abusive, 0 not
    source: str


@dataclass
class AbuseDataset:
    records: list[AbuseRecord]
    shuffled: bool
    shuffle_seed: int
    rejected: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)


def _binary_label(rec: dict, spec: SourceSpec) -> Optional[int]:
    found = False
    positive = {v.lower() for v in spec.positive_values}
    for fieldname in spec.label_fields:
        if fieldname not in rec or rec[fieldname] in (None, ""):
            continue
        found = True
        if str(rec[fieldname]).strip().lower() in positive:
            return 1
    return 0 if found else None


def read_source(spec: SourceSpec) -> tuple[list[AbuseRecord], int]:
    """Read one labelled source; returns (records, rejected_count)."""
    records: list[AbuseRecord] = []
    rejected = 0

    def handle(rec: dict) -> None:
        nonlocal rejected
        label = _binary_label(rec, spec)
        text = rec.get(spec.text_field)
        if label is None or text is None:
            rejected += 1
            return
        records.append(AbuseRecord(text=str(text), label=label, source=spec.name))

    if spec.format == "jsonl":
        with open(spec.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    handle(json.loads(line))
    elif spec.format == "csv":
        with open(spec.path, encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                handle(rec)
    else:
        raise ValueError(f"unknown source format {spec.format!r}")
    return records, rejected


def assemble(sources: Sequence[SourceSpec], seed: int = 0) -> tuple[AbuseDataset, dict]:
    """Build the shuffled ensemble and its composition report."""
    all_records: list[AbuseRecord] = []
    rejected: dict[str, int] = {}
    per_source = []
    for spec in sources:
        records, bad = read_source(spec)
        if bad:
            rejected[spec.name] = bad
            logger.warning("%s: rejected %d unlabelled records", spec.name, bad)
        for rec in records:
            rec.text = clean_text(rec.text, markup=True).lower()
        abusive = sum(r.label for r in records)
        per_source.append(
            {
                "name": spec.name,
                "size": len(records),
                "abusive": abusive,
                "abusive_fraction": abusive / len(records) if records else 0.0,
            }
        )
        all_records.extend(records)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(all_records))
    shuffled = [all_records[i] for i in order]
    dataset = AbuseDataset(records=shuffled, shuffled=True, shuffle_seed=seed, rejected=rejected)

    total_abusive = sum(r.label for r in shuffled)
    report = {
        "sources": per_source,
        "ensemble": {
            "size": len(shuffled),
            "abusive": total_abusive,
            "abusive_fraction": total_abusive / len(shuffled) if shuffled else 0.0,
        },
        "shuffle_seed": seed,
        "rejected": rejected,
    }
    return dataset, report


def train_abuse(
    dataset: AbuseDataset,
    config: ModelConfig,
    table,
    seed: int = 0,
) -> tuple[SequenceModel, dict]:
    """Train the abuse classifier on hard labels (weight 1 per record).

    Returns the model and a summary with the held-out accuracy and the
    train/test split sizes.
    """
    labels = {r.label for r in dataset.records}
    if len(labels) < 2:
        raise TrainingError("abuse ensemble must contain both classes")
    examples = [
        TrainingExample(
            segment_id=f"abuse-{i}",
            token_vectors=vectorize(rec.text, table, config.max_tokens),
            soft_label=float(rec.label),
        )
        for i, rec in enumerate(dataset.records)
    ]
    model = SequenceModel.build(config, seed=seed)
    history = model.train(examples, seed=seed)
    best_epoch = int(np.argmin(history["val_loss"]))
    n_train = max(1, int(len(examples) * config.train_fraction))
    summary = {
        "train_size": n_train,
        "test_size": len(examples) - n_train,
        "epochs_run": len(history["loss"]),
        "best_epoch": best_epoch,
        "test_accuracy": history["val_accuracy"][best_epoch],
        "history": history,
    }
    return model, summary


def predict_abuse(model: SequenceModel, segments: Iterable[Segment], table) -> dict[str, float]:
    return model.predict(segments, table)


def write_manifest(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
