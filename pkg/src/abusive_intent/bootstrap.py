"""Co-training rounds: run both learners, cap, merge, and lock labels.

Each round takes an immutable snapshot of the label state. The n-gram
learner scores and proposes from predictive grams while the deep learner
retrains and proposes from amplified predictions; each learner's new hard
proposals are capped at the previous round's class counts. The merge is
the only writer: agreeing or unopposed proposals lock, contradictions
leave the label untouched, and unproposed unlocked segments take the deep
learner's amplified prediction as their working value.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import Segment
from .embeddings import EmbeddingTable
from .errors import ConfigurationError
from .ngrams import (
    NgramIndex,
    Proposal,
    propose_labels,
    score_ngrams,
    select_predictive,
)
from .recurrent import (
    ModelConfig,
    SequenceModel,
    TrainingExample,
    amplify_extremes,
    vectorize,
)

logger = logging.getLogger(__name__)

HISTOGRAM_BINS = 10


@dataclass
class LabelEntry:
    value: float
    locked: bool = False
    history: list[tuple[int, float, str]] = field(default_factory=list)


class LabelState:
    """Per-segment working labels with locking and provenance history."""

    def __init__(self, entries: Optional[dict[str, LabelEntry]] = None):
        self.entries: dict[str, LabelEntry] = entries or {}

    @classmethod
    def from_values(
        cls, values: Mapping[str, float], lock_extremes: bool = True, source: str = "template"
    ) -> "LabelState":
        entries = {}
        for seg_id, value in values.items():
            locked = lock_extremes and value in (0.0, 1.0)
            entries[seg_id] = LabelEntry(
                value=value, locked=locked, history=[(0, value, source)]
            )
        return cls(entries)

    def value(self, seg_id: str) -> float:
        return self.entries[seg_id].value

    def is_locked(self, seg_id: str) -> bool:
        return self.entries[seg_id].locked

    def values(self) -> dict[str, float]:
        return {s: e.value for s, e in self.entries.items()}

    def locked_ids(self) -> set[str]:
        return {s for s, e in self.entries.items() if e.locked}

    def counts(self) -> tuple[int, int]:
        n_p = sum(1 for e in self.entries.values() if e.locked and e.value == 1.0)
        n_n = sum(1 for e in self.entries.values() if e.locked and e.value == 0.0)
        return n_p, n_n

    def copy(self) -> "LabelState":
        return LabelState(
            {
                s: LabelEntry(e.value, e.locked, list(e.history))
                for s, e in self.entries.items()
            }
        )

    def set(self, seg_id: str, value: float, locked: bool, round_idx: int, source: str) -> None:
        entry = self.entries[seg_id]
        if entry.locked:
            raise ValueError(f"segment {seg_id} is locked; labels never change once locked")
        if locked and value not in (0.0, 1.0):
            raise ValueError("only hard 0/1 labels may lock")
        entry.value = value
        entry.locked = locked
        entry.history.append((round_idx, value, source))

    def histogram(self) -> list[int]:
        values = list(self.values().values())
        counts, _ = np.histogram(values, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
        return [int(c) for c in counts]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for seg_id in sorted(self.entries):
                e = self.entries[seg_id]
                source = e.history[-1][2] if e.history else "unknown"
                fh.write(
                    json.dumps(
                        {
                            "segment_id": seg_id,
                            "value": e.value,
                            "locked": e.locked,
                            "source": source,
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: str) -> "LabelState":
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                entries[rec["segment_id"]] = LabelEntry(
                    value=float(rec["value"]),
                    locked=bool(rec["locked"]),
                    history=[(0, float(rec["value"]), rec.get("source", "unknown"))],
                )
        return cls(entries)


@dataclass
class RoundCap:
    n_p: int
    n_n: int

    @classmethod
    def from_state(cls, state: LabelState) -> "RoundCap":
        n_p, n_n = state.counts()
        return cls(n_p=n_p, n_n=n_n)


@dataclass
class RoundReport:
    round_index: int
    new_locked_pos: int
    new_locked_neg: int
    contradictions: int
    histogram: list[int]
    presented: dict[str, int] = field(default_factory=dict)
    locked_total: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "round": self.round_index,
                "new_locked_pos": self.new_locked_pos,
                "new_locked_neg": self.new_locked_neg,
                "contradictions": self.contradictions,
                "histogram": self.histogram,
                "presented": self.presented,
                "locked_total": self.locked_total,
            },
            sort_keys=True,
        )


def apply_cap(
    proposals: Mapping[str, Proposal], cap: RoundCap, state: LabelState
) -> dict[str, Proposal]:
    """Keep the most confident new proposals within the per-class caps.

    Proposals for already-locked segments drop first; the survivors are
    the top ``n_p`` positives and ``n_n`` negatives by confidence
    (segment id breaks ties deterministically).
    """
    fresh = {s: p for s, p in proposals.items() if not state.is_locked(s)}
    positives = sorted(
        (s for s, p in fresh.items() if p.label == 1),
        key=lambda s: (-fresh[s].confidence, s),
    )
    negatives = sorted(
        (s for s, p in fresh.items() if p.label == 0),
        key=lambda s: (-fresh[s].confidence, s),
    )
    kept = positives[: cap.n_p] + negatives[: cap.n_n]
    return {s: fresh[s] for s in kept}


def merge(
    capped_a: Mapping[str, Proposal],
    capped_b: Mapping[str, Proposal],
    state: LabelState,
    round_idx: int = 0,
    fallback: Optional[Mapping[str, float]] = None,
    sources: tuple[str, str] = ("ngram", "deep"),
) -> tuple[LabelState, RoundReport]:
    """Merge two capped proposal maps into a new label state.

    Locked labels never change. A segment proposed by one model, or by
    both in agreement, adopts the hard label and locks. Contradictory
    proposals leave the value unchanged and count as a contradiction.
    Unlocked segments with no proposal take the ``fallback`` score.
    """
    new_state = state.copy()
    contradictions = 0
    new_pos = new_neg = 0
    proposed = sorted(set(capped_a) | set(capped_b))
    for seg_id in proposed:
        if new_state.is_locked(seg_id):
            continue
        a = capped_a.get(seg_id)
        b = capped_b.get(seg_id)
        if a is not None and b is not None and a.label != b.label:
            contradictions += 1
            continue
        if a is not None and b is not None:
            label, source = a.label, "merge"
        elif a is not None:
            label, source = a.label, sources[0]
        else:
            label, source = b.label, sources[1]
        new_state.set(seg_id, float(label), True, round_idx, source)
        if label == 1:
            new_pos += 1
        else:
            new_neg += 1

    contradicted = {
        s for s in set(capped_a) & set(capped_b)
        if capped_a[s].label != capped_b[s].label
    }
    if fallback:
        for seg_id, score in fallback.items():
            if seg_id not in new_state.entries or seg_id in contradicted:
                continue
            if new_state.is_locked(seg_id):
                continue
            new_state.set(seg_id, float(score), False, round_idx, sources[1])

    report = RoundReport(
        round_index=round_idx,
        new_locked_pos=new_pos,
        new_locked_neg=new_neg,
        contradictions=contradictions,
        histogram=new_state.histogram(),
        locked_total=len(new_state.locked_ids()),
    )
    return new_state, report


@dataclass
class BootstrapConfig:
    rounds: int = 6
    percentile: float = 99.9
    smoothing: Optional[float] = None
    amplify_threshold: float = 0.9
    amplify_factor: float = 0.10
    hard_proposal_threshold: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigurationError("at least one round is required")
        if not 0.5 < self.hard_proposal_threshold <= 1.0:
            raise ConfigurationError("hard proposal threshold must be in (0.5, 1]")


class Bootstrap:
    """Orchestrates co-training rounds over a fixed segment set."""

    def __init__(
        self,
        segments: Sequence[Segment],
        index: NgramIndex,
        table: EmbeddingTable,
        model_config: ModelConfig,
        config: Optional[BootstrapConfig] = None,
    ):
        self.segments = list(segments)
        self.index = index
        self.table = table
        self.model_config = model_config
        self.config = config or BootstrapConfig()
        self.histories: list[tuple[int, dict]] = []  # (round, training history)
        self._vectors = {
            seg.segment_id: vectorize(seg.text, table, model_config.max_tokens)
            for seg in self.segments
        }

    def _ngram_proposals(self, labels: Mapping[str, float]) -> dict[str, Proposal]:
        scores = score_ngrams(self.index, labels, self.config.smoothing)
        intentful, non_intentful = select_predictive(scores, self.config.percentile)
        return propose_labels(
            self.segments, intentful, non_intentful, self.index.n_min, self.index.n_max
        )

    def _deep_proposals(
        self, labels: Mapping[str, float], round_idx: int
    ) -> tuple[dict[str, Proposal], dict[str, float]]:
        examples = [
            TrainingExample(seg.segment_id, self._vectors[seg.segment_id], labels[seg.segment_id])
            for seg in self.segments
        ]
        model = SequenceModel.build(self.model_config, seed=self.config.seed + round_idx)
        history = model.train(examples, seed=self.config.seed + round_idx)
        self.histories.append((round_idx, history))
        raw = model.predict(self.segments, self.table)
        amplified = amplify_extremes(
            raw, self.config.amplify_threshold, self.config.amplify_factor
        )
        threshold = self.config.hard_proposal_threshold
        proposals = {}
        for seg_id, p in amplified.items():
            if p >= threshold:
                proposals[seg_id] = Proposal(1, abs(p - 0.5))
            elif p <= 1.0 - threshold:
                proposals[seg_id] = Proposal(0, abs(p - 0.5))
        return proposals, amplified

    def run_round(self, state: LabelState, round_idx: int) -> tuple[LabelState, RoundReport]:
        """One co-training round; the input state is never mutated."""
        labels = state.values()
        cap = RoundCap.from_state(state)
        ngram_props = self._ngram_proposals(labels)
        deep_props, amplified = self._deep_proposals(labels, round_idx)
        capped_ngram = apply_cap(ngram_props, cap, state)
        capped_deep = apply_cap(deep_props, cap, state)
        new_state, report = merge(
            capped_ngram, capped_deep, state, round_idx, fallback=amplified
        )
        report.presented = {
            "ngram_pos": sum(1 for p in capped_ngram.values() if p.label == 1),
            "ngram_neg": sum(1 for p in capped_ngram.values() if p.label == 0),
            "deep_pos": sum(1 for p in capped_deep.values() if p.label == 1),
            "deep_neg": sum(1 for p in capped_deep.values() if p.label == 0),
        }
        logger.info(
            "round %d: +%d locked positive, +%d locked negative, %d contradictions",
            round_idx, report.new_locked_pos, report.new_locked_neg, report.contradictions,
        )
        return new_state, report

    def run(
        self, state: LabelState, rounds: Optional[int] = None
    ) -> tuple[LabelState, list[RoundReport]]:
        """Run rounds until the budget is spent or a round locks nothing."""
        budget = rounds if rounds is not None else self.config.rounds
        if budget < 1:
            raise ConfigurationError("at least one round is required")
        reports: list[RoundReport] = []
        for round_idx in range(1, budget + 1):
            state, report = self.run_round(state, round_idx)
            reports.append(report)
            if report.new_locked_pos + report.new_locked_neg == 0:
                logger.info("round %d locked nothing; stopping early", round_idx)
                break
        return state, reports


def write_reports(reports: Sequence[RoundReport], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(rep.to_json() + "\n")
