"""Human-validation protocol: tranches, votes, and agreement reporting.

Volunteers label tranches of five sampled segments plus one qualifying
example with a known label; a wrong qualifier answer discards the whole
tranche. Votes resolve on a first-to-3 basis within at most five votes,
and resolved segments leave the sampling pool. State mutations append to
an event log so a study can be audited or rebuilt by replay.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

DEFAULT_POOL_SIZE = 5000
QUOTA_TRANCHES = 6
SEGMENTS_PER_TRANCHE = 5
VOTES_TO_RESOLVE = 3
MAX_VOTES = 5
SCORE_BANDS = ((0.0, 0.4), (0.6, 1.0))


class QuotaExceededError(RuntimeError):
    pass


class PoolExhaustedError(RuntimeError):
    pass


class DuplicateSubmissionError(RuntimeError):
    pass


class UnknownTrancheError(KeyError):
    pass


@dataclass
class Qualifier:
    text: str
    intentful: bool
    abusive: Optional[bool] = None


@dataclass
class TrancheItem:
    segment_id: str
    text: str
    is_qualifier: bool = False


@dataclass
class Tranche:
    tranche_id: str
    volunteer_id: str
    items: list[TrancheItem]
    expected_intentful: bool
    status: str = "open"  # open | accepted | discarded

    @property
    def qualifier_position(self) -> int:
        return next(i for i, item in enumerate(self.items) if item.is_qualifier)


@dataclass
class VoteState:
    segment_id: str
    votes: list[tuple[str, bool]] = field(default_factory=list)
    abuse_votes: list[tuple[str, bool]] = field(default_factory=list)
    resolved: Optional[bool] = None
    abuse_resolved: Optional[bool] = None

    @property
    def vote_ratio(self) -> float:
        if not self.votes:
            return 0.0
        return sum(1 for _, v in self.votes if v) / len(self.votes)


def resolve_first_to_three(votes: Sequence[bool]) -> Optional[bool]:
    """Side that first reaches 3 votes, or None while undecided."""
    pos = neg = 0
    for v in votes:
        if v:
            pos += 1
        else:
            neg += 1
        if pos == VOTES_TO_RESOLVE:
            return True
        if neg == VOTES_TO_RESOLVE:
            return False
    return None


def eligible_for_pool(score: float) -> bool:
    return any(lo <= score <= hi for lo, hi in SCORE_BANDS)


@dataclass
class SamplingPool:
    candidates: set[str]
    initial_size: int
    seed: int
    warning: Optional[str] = None


def build_pool(
    model_scores: Mapping[str, float], size: int = DEFAULT_POOL_SIZE, seed: int = 0
) -> SamplingPool:
    """Sample candidate segments from the extreme score bands.

    Uniform without replacement; if fewer eligible segments exist than
    requested, the pool holds them all and carries a warning.
    """
    eligible = sorted(s for s, v in model_scores.items() if eligible_for_pool(v))
    warning = None
    if len(eligible) <= size:
        chosen = eligible
        if len(eligible) < size:
            warning = f"only {len(eligible)} eligible segments for a pool of {size}"
    else:
        rng = np.random.default_rng(seed)
        chosen = list(rng.choice(eligible, size=size, replace=False))
    return SamplingPool(
        candidates=set(chosen), initial_size=len(chosen), seed=seed, warning=warning
    )


class AnnotationService:
    """In-memory study state with an append-only event log.

    Thread-safe: issuance and submission serialize on one lock, which is
    the single writer for votes and pool membership.
    """

    def __init__(
        self,
        texts: Mapping[str, str],
        intent_scores: Mapping[str, float],
        qualifiers: Sequence[Qualifier],
        abuse_scores: Optional[Mapping[str, float]] = None,
        pool_size: int = DEFAULT_POOL_SIZE,
        seed: int = 0,
        quota: int = QUOTA_TRANCHES,
        event_log_path: Optional[str] = None,
    ):
        if not qualifiers:
            raise ValueError("a qualifier bank is required")
        self.texts = dict(texts)
        self.intent_scores = dict(intent_scores)
        self.abuse_scores = dict(abuse_scores) if abuse_scores else None
        self.qualifiers = list(qualifiers)
        self.quota = quota
        self.pool = build_pool(self.intent_scores, pool_size, seed)
        self.votes: dict[str, VoteState] = {}
        self.tranches: dict[str, Tranche] = {}
        self.by_volunteer: dict[str, list[str]] = {}
        self.seen: dict[str, set[str]] = {}
        self._rng = np.random.default_rng(seed + 1)
        self._counter = 0
        self._lock = threading.Lock()
        self._replaying = False
        self._event_log_path = event_log_path
        self._append_event(
            {
                "event": "pool_built",
                "size": self.pool.initial_size,
                "seed": seed,
                "warning": self.pool.warning,
            }
        )

    # --- event log -------------------------------------------------------

    def _append_event(self, event: dict) -> None:
        if self._event_log_path and not self._replaying:
            with open(self._event_log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def replay(self, path: str) -> None:
        """Rebuild state by re-applying a recorded event log.

        The service must be constructed with the same inputs (texts,
        scores, qualifiers, pool seed) that produced the log; issued
        tranches are reconstructed verbatim rather than re-sampled.
        """
        self._replaying = True
        try:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    event = json.loads(line)
                    kind = event.get("event")
                    if kind == "tranche_issued":
                        self._apply_issued(event)
                    elif kind == "tranche_submitted":
                        self.submit_tranche(
                            event["tranche_id"],
                            [(a, b) for a, b in event["answers"]],
                        )
        finally:
            self._replaying = False

    def _apply_issued(self, event: dict) -> None:
        with self._lock:
            qualifier = self.qualifiers[event["qualifier_index"]]
            items = [
                TrancheItem(segment_id=s, text=self.texts.get(s, ""))
                for s in event["segments"]
            ]
            items.insert(
                event["qualifier_position"],
                TrancheItem(
                    segment_id=f"qualifier:{event['qualifier_index']}",
                    text=qualifier.text,
                    is_qualifier=True,
                ),
            )
            tranche = Tranche(
                tranche_id=event["tranche_id"],
                volunteer_id=event["volunteer_id"],
                items=items,
                expected_intentful=event["expected"],
            )
            self.tranches[tranche.tranche_id] = tranche
            self.by_volunteer.setdefault(event["volunteer_id"], []).append(tranche.tranche_id)
            self.seen.setdefault(event["volunteer_id"], set()).update(event["segments"])
            self._counter = max(self._counter, int(tranche.tranche_id.lstrip("t")))

    # --- issuance ----------------------------------------------------------

    def _completed_count(self, volunteer_id: str) -> int:
        return sum(
            1
            for tid in self.by_volunteer.get(volunteer_id, [])
            if self.tranches[tid].status != "open"
        )

    def next_tranche(self, volunteer_id: str) -> Tranche:
        """Issue (or re-serve) the volunteer's tranche of 5 + 1 qualifier."""
        with self._lock:
            issued = self.by_volunteer.get(volunteer_id, [])
            for tid in issued:
                if self.tranches[tid].status == "open":
                    return self.tranches[tid]
            if len(issued) >= self.quota:
                raise QuotaExceededError(
                    f"volunteer {volunteer_id} reached the quota of {self.quota} tranches"
                )
            seen = self.seen.setdefault(volunteer_id, set())
            available = sorted(self.pool.candidates - seen)
            if len(available) < SEGMENTS_PER_TRANCHE:
                raise PoolExhaustedError(
                    f"only {len(available)} unseen unresolved segments remain"
                )
            picked = [
                str(s)
                for s in self._rng.choice(
                    available, size=SEGMENTS_PER_TRANCHE, replace=False
                )
            ]
            qualifier_index = int(self._rng.integers(len(self.qualifiers)))
            qualifier = self.qualifiers[qualifier_index]
            position = int(self._rng.integers(SEGMENTS_PER_TRANCHE + 1))

            items = [
                TrancheItem(segment_id=s, text=self.texts.get(s, "")) for s in picked
            ]
            q_item = TrancheItem(
                segment_id=f"qualifier:{qualifier_index}",
                text=qualifier.text,
                is_qualifier=True,
            )
            items.insert(position, q_item)

            self._counter += 1
            tranche = Tranche(
                tranche_id=f"t{self._counter:05d}",
                volunteer_id=volunteer_id,
                items=items,
                expected_intentful=qualifier.intentful,
            )
            self.tranches[tranche.tranche_id] = tranche
            self.by_volunteer.setdefault(volunteer_id, []).append(tranche.tranche_id)
            seen.update(picked)
            self._append_event(
                {
                    "event": "tranche_issued",
                    "tranche_id": tranche.tranche_id,
                    "volunteer_id": volunteer_id,
                    "segments": picked,
                    "qualifier_index": qualifier_index,
                    "qualifier_position": position,
                    "expected": qualifier.intentful,
                }
            )
            return tranche

    # --- submission ---------------------------------------------------------

    def submit_tranche(
        self, tranche_id: str, answers: Sequence[tuple[bool, bool]]
    ) -> dict:
        """Record a tranche's six (intentful, abusive) answers.

        A wrong qualifier answer discards the tranche without recording
        any votes. Votes for segments resolved in the meantime are
        refused individually; the rest append and may resolve.
        """
        with self._lock:
            tranche = self.tranches.get(tranche_id)
            if tranche is None:
                raise UnknownTrancheError(tranche_id)
            if tranche.status != "open":
                raise DuplicateSubmissionError(
                    f"tranche {tranche_id} already {tranche.status}"
                )
            if len(answers) != len(tranche.items):
                raise ValueError(
                    f"expected {len(tranche.items)} answers, got {len(answers)}"
                )

            q_pos = tranche.qualifier_position
            if bool(answers[q_pos][0]) != tranche.expected_intentful:
                tranche.status = "discarded"
                self._append_event(
                    {"event": "tranche_submitted", "tranche_id": tranche_id,
                     "answers": [[bool(a), bool(b)] for a, b in answers],
                     "status": "discarded"}
                )
                return {"status": "discarded", "votes_recorded": 0, "resolved": []}

            tranche.status = "accepted"
            recorded = 0
            refused = []
            newly_resolved = []
            for item, (intent_ans, abuse_ans) in zip(tranche.items, answers):
                if item.is_qualifier:
                    continue
                state = self.votes.setdefault(item.segment_id, VoteState(item.segment_id))
                if state.resolved is not None:
                    refused.append(item.segment_id)
                    continue
                state.votes.append((tranche.volunteer_id, bool(intent_ans)))
                state.abuse_votes.append((tranche.volunteer_id, bool(abuse_ans)))
                recorded += 1
                state.resolved = resolve_first_to_three([v for _, v in state.votes])
                state.abuse_resolved = resolve_first_to_three(
                    [v for _, v in state.abuse_votes]
                )
                if state.resolved is not None:
                    self.pool.candidates.discard(item.segment_id)
                    newly_resolved.append(item.segment_id)
            self._append_event(
                {"event": "tranche_submitted", "tranche_id": tranche_id,
                 "answers": [[bool(a), bool(b)] for a, b in answers],
                 "status": "accepted"}
            )
            return {
                "status": "accepted",
                "votes_recorded": recorded,
                "resolved": newly_resolved,
                "refused": refused,
            }

    # --- reporting ------------------------------------------------------------

    def _dimension_report(
        self, scores: Mapping[str, float], resolved_of, ratio_of
    ) -> dict:
        resolved = {
            s: st for s, st in self.votes.items() if resolved_of(st) is not None
        }
        if not resolved:
            return {"resolved": 0, "binary_agreement": None,
                    "weighted_agreement": None,
                    "confusion": {"tp": 0, "fp": 0, "fn": 0, "tn": 0}}
        binary_hits = 0
        abs_diffs = []
        confusion = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
        for seg_id, state in resolved.items():
            model_score = scores.get(seg_id)
            if model_score is None:
                continue
            model_bin = model_score >= 0.5
            human_bin = resolved_of(state)
            if model_bin == human_bin:
                binary_hits += 1
            abs_diffs.append(abs(model_score - ratio_of(state)))
            if model_bin and human_bin:
                confusion["tp"] += 1
            elif model_bin and not human_bin:
                confusion["fp"] += 1
            elif not model_bin and human_bin:
                confusion["fn"] += 1
            else:
                confusion["tn"] += 1
        n = sum(confusion.values())
        return {
            "resolved": n,
            "binary_agreement": binary_hits / n if n else None,
            "weighted_agreement": 1.0 - float(np.mean(abs_diffs)) if abs_diffs else None,
            "confusion": confusion,
        }

    def agreement_report(self) -> dict:
        """Model-vs-human agreement over resolved segments, per dimension."""
        with self._lock:
            report = {
                "version": 1,
                "intent": self._dimension_report(
                    self.intent_scores,
                    lambda st: st.resolved,
                    lambda st: st.vote_ratio,
                ),
                "pool": {
                    "initial": self.pool.initial_size,
                    "remaining": len(self.pool.candidates),
                    "resolved": sum(
                        1 for st in self.votes.values() if st.resolved is not None
                    ),
                },
                "tranches": {
                    "issued": len(self.tranches),
                    "accepted": sum(
                        1 for t in self.tranches.values() if t.status == "accepted"
                    ),
                    "discarded": sum(
                        1 for t in self.tranches.values() if t.status == "discarded"
                    ),
                },
            }
            if self.abuse_scores is not None:
                report["abuse"] = self._dimension_report(
                    self.abuse_scores,
                    lambda st: st.abuse_resolved,
                    lambda st: (
                        sum(1 for _, v in st.abuse_votes if v) / len(st.abuse_votes)
                        if st.abuse_votes
                        else 0.0
                    ),
                )
            return report

    def progress(self, volunteer_id: str) -> dict:
        with self._lock:
            issued = self.by_volunteer.get(volunteer_id, [])
            return {
                "volunteer_id": volunteer_id,
                "completed": self._completed_count(volunteer_id),
                "accepted": sum(
                    1 for t in issued if self.tranches[t].status == "accepted"
                ),
                "quota": self.quota,
            }


def load_qualifiers(path: str) -> list[Qualifier]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(
                Qualifier(
                    text=rec["text"],
                    intentful=bool(rec["intentful"]),
                    abusive=rec.get("abusive"),
                )
            )
    return out


def default_qualifiers() -> list[Qualifier]:
    """Constructed known-label examples; deliberately not corpus text."""
    from importlib import resources

    ref = resources.files("abusive_intent").joinpath("data/qualifiers.jsonl")
    out = []
    for line in ref.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            out.append(
                Qualifier(
                    text=rec["text"],
                    intentful=bool(rec["intentful"]),
                    abusive=rec.get("abusive"),
                )
            )
    return out
