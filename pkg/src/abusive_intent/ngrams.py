"""Capped word n-gram index and intent-rate scoring.

N-grams (n in [n_min, n_max]) are counted by the number of segments they
appear in; when the distinct count exceeds the cap only the most frequent
survive. A gram's intent rate compares its normalized occurrence among
positive segments (label > 0.5) to negative segments (label < 0.5);
segments at exactly 0.5 are ignored. Grams in the extreme percentiles of
the rate distribution propose hard labels.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import Segment
from .errors import ScoringError

logger = logging.getLogger(__name__)

DEFAULT_N_MIN = 3
DEFAULT_N_MAX = 6
DEFAULT_CAP = 500_000
DEFAULT_PERCENTILE = 99.9

INDEX_FORMAT = "ngram-index"
INDEX_VERSION = 1


def extract_ngrams(tokens: Sequence[str], n_min: int, n_max: int) -> Iterable[str]:
    for n in range(n_min, n_max + 1):
        for start in range(len(tokens) - n + 1):
            yield " ".join(tokens[start:start + n])


@dataclass
class NgramIndex:
    n_min: int = DEFAULT_N_MIN
    n_max: int = DEFAULT_N_MAX
    cap: int = DEFAULT_CAP
    grams: dict[str, list[str]] = field(default_factory=dict)
    total_segments: int = 0

    def segment_grams(self, segment: Segment) -> set[str]:
        """Grams of a segment that survived the cap."""
        return {
            g for g in extract_ngrams(segment.tokens(), self.n_min, self.n_max)
            if g in self.grams
        }


@dataclass
class NgramScore:
    gram: str
    intent_rate: float
    direction: str = "neutral"  # assigned by percentile selection


def build_index(
    segments: Iterable[Segment],
    n_min: int = DEFAULT_N_MIN,
    n_max: int = DEFAULT_N_MAX,
    cap: int = DEFAULT_CAP,
) -> NgramIndex:
    """Index segments by their word n-grams, keeping the top-``cap`` grams.

    Frequency is the number of distinct segments containing the gram;
    ties at the cap boundary break lexicographically. Posting lists are
    sorted and deduplicated, so the serialized index is deterministic.
    """
    postings: dict[str, set[str]] = {}
    total = 0
    for seg in segments:
        total += 1
        for gram in set(extract_ngrams(seg.tokens(), n_min, n_max)):
            postings.setdefault(gram, set()).add(seg.segment_id)
    if len(postings) > cap:
        kept = sorted(postings, key=lambda g: (-len(postings[g]), g))[:cap]
        postings = {g: postings[g] for g in kept}
    grams = {g: sorted(postings[g]) for g in sorted(postings)}
    return NgramIndex(n_min=n_min, n_max=n_max, cap=cap, grams=grams, total_segments=total)


def score_ngrams(
    index: NgramIndex,
    labels: Mapping[str, float],
    smoothing: Optional[float] = None,
) -> list[NgramScore]:
    """Rate every indexed gram by its positive/negative occurrence ratio.

    ``smoothing`` defaults to 1/(N_pos + N_neg), keeping rates finite for
    grams absent from one class; pass 0 for the raw ratio.
    """
    n_pos = sum(1 for v in labels.values() if v > 0.5)
    n_neg = sum(1 for v in labels.values() if v < 0.5)
    if n_pos == 0 or n_neg == 0:
        raise ScoringError(
            f"both classes required for rate scoring (positives={n_pos}, negatives={n_neg})"
        )
    if smoothing is None:
        smoothing = 1.0 / (n_pos + n_neg)

    scores = []
    for gram, segment_ids in index.grams.items():
        c_pos = c_neg = 0
        for sid in segment_ids:
            value = labels.get(sid)
            if value is None or value == 0.5:
                continue
            if value > 0.5:
                c_pos += 1
            else:
                c_neg += 1
        numer = c_pos / n_pos + smoothing
        denom = c_neg / n_neg + smoothing
        if denom == 0.0:
            rate = 1.0 if numer == 0.0 else float("inf")
        else:
            rate = numer / denom
        scores.append(NgramScore(gram=gram, intent_rate=rate))
    return scores


def select_predictive(
    scores: Sequence[NgramScore], percentile: float = DEFAULT_PERCENTILE
) -> tuple[dict[str, float], dict[str, float]]:
    """Split grams into the predictive extremes of the rate distribution.

    The tail size is the mirrored nearest rank ``ceil((100-p)/100 * m)``
    counted from each end, so both tails hold the same number of ranks
    (10 from 10,000 grams at 99.9) and swapping the label classes swaps
    the two sets exactly. Membership compares against the threshold
    VALUE, so ties widen a tail. Returns two gram -> rate maps and tags
    each score's direction in place.
    """
    if not scores:
        raise ScoringError("no scores to select from")
    if not 50.0 < percentile <= 100.0:
        raise ScoringError("selection percentile must be in (50, 100]")
    rates = sorted(s.intent_rate for s in scores)
    m = len(rates)
    k = min(max(math.ceil((100.0 - percentile) / 100.0 * m), 1), m)
    high = rates[m - k]
    low = rates[k - 1]
    intentful: dict[str, float] = {}
    non_intentful: dict[str, float] = {}
    for s in scores:
        if s.intent_rate >= high:
            s.direction = "intentful"
            intentful[s.gram] = s.intent_rate
        if s.intent_rate <= low:
            # degenerate distributions can land a gram in both maps; the
            # direction tag keeps the first assignment
            if s.direction == "neutral":
                s.direction = "non_intentful"
            non_intentful[s.gram] = s.intent_rate
    if intentful.keys() & non_intentful.keys():
        logger.warning(
            "degenerate rate distribution: %d grams fall in both extremes",
            len(intentful.keys() & non_intentful.keys()),
        )
    return intentful, non_intentful


@dataclass
class Proposal:
    label: int  # 1 or 0
    confidence: float


def propose_labels(
    segments: Iterable[Segment],
    intentful: Mapping[str, float],
    non_intentful: Mapping[str, float],
    n_min: int = DEFAULT_N_MIN,
    n_max: int = DEFAULT_N_MAX,
) -> dict[str, Proposal]:
    """Hard label proposals from predictive-gram membership.

    A segment with only intentful grams proposes 1, only non-intentful
    proposes 0; segments with both or neither propose nothing. Confidence
    is the most extreme contained rate (reciprocal for negatives).
    """
    proposals: dict[str, Proposal] = {}
    for seg in segments:
        grams = set(extract_ngrams(seg.tokens(), n_min, n_max))
        pos_hits = [intentful[g] for g in grams if g in intentful]
        neg_hits = [non_intentful[g] for g in grams if g in non_intentful]
        if pos_hits and not neg_hits:
            proposals[seg.segment_id] = Proposal(1, max(pos_hits))
        elif neg_hits and not pos_hits:
            best = min(neg_hits)
            confidence = float("inf") if best == 0.0 else 1.0 / best
            proposals[seg.segment_id] = Proposal(0, confidence)
    return proposals


def propose_from_index(
    index: NgramIndex,
    intentful: Mapping[str, float],
    non_intentful: Mapping[str, float],
) -> dict[str, Proposal]:
    """Same rule as ``propose_labels`` but driven by posting lists alone.

    Equivalent because membership can only involve indexed grams; useful
    when the segment store is not at hand.
    """
    pos_best: dict[str, float] = {}
    neg_best: dict[str, float] = {}
    for gram, rate in intentful.items():
        for sid in index.grams.get(gram, ()):
            pos_best[sid] = max(pos_best.get(sid, rate), rate)
    for gram, rate in non_intentful.items():
        for sid in index.grams.get(gram, ()):
            neg_best[sid] = min(neg_best.get(sid, rate), rate)
    proposals: dict[str, Proposal] = {}
    for sid, rate in pos_best.items():
        if sid not in neg_best:
            proposals[sid] = Proposal(1, rate)
    for sid, rate in neg_best.items():
        if sid not in pos_best:
            confidence = float("inf") if rate == 0.0 else 1.0 / rate
            proposals[sid] = Proposal(0, confidence)
    return proposals


# --- serialization ---------------------------------------------------------


def save_index(index: NgramIndex, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "n_min": index.n_min,
            "n_max": index.n_max,
            "cap": index.cap,
            "total_segments": index.total_segments,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for gram in index.grams:
            fh.write(json.dumps({"g": gram, "s": index.grams[gram]}) + "\n")


def load_index(path: str) -> NgramIndex:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != INDEX_FORMAT or header.get("version") != INDEX_VERSION:
            raise ValueError(f"{path}: not a version-{INDEX_VERSION} {INDEX_FORMAT} file")
        grams = {}
        for line in fh:
            rec = json.loads(line)
            grams[rec["g"]] = rec["s"]
    return NgramIndex(
        n_min=header["n_min"],
        n_max=header["n_max"],
        cap=header["cap"],
        grams=grams,
        total_segments=header["total_segments"],
    )
