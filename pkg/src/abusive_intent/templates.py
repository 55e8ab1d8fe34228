"""Intent template matching over dependency parses and initial labels.

Two constructions express explicit intent. The short form puts the desire
word in auxiliary position under the action verb ("i will kill you"); the
long form heads the clause with the desire verb and takes the action verb
as an open clausal complement introduced by "to" ("i want to leave").
In both, a first-person pronoun must be the nominal subject of the action
verb, and pronoun < desire < action in surface order. Targets are direct
objects and timing words noun-phrase adverbial modifiers of the action.

Initial labels: a match scores 1.0; a negated match, a question, or a
second/third-person subject on a desire construction scores 0.0; contrast
corpus segments score 0.0 unconditionally; everything else is 0.5.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import Segment
from .parsing import (
    AUX,
    DOBJ,
    FIRST_PERSON,
    NEG,
    NPADVMOD,
    NSUBJ,
    SECOND_PERSON,
    THIRD_PERSON,
    XCOMP,
    ParseToken,
    children,
)

logger = logging.getLogger(__name__)

# modal/periphrastic futures always qualify in the auxiliary slot
SHORT_FORM_EXTRA_DESIRE = {"will", "going"}

LABEL_REASONS = {
    "template_match": 1.0,
    "negation": 0.0,
    "question": 0.0,
    "second_or_third_person": 0.0,
    "wikipedia_contrast": 0.0,
    "undetermined": 0.5,
}

CONTRAST_SOURCES = {"wikipedia"}


@dataclass
class TemplateMatch:
    form: str  # "short" | "long"
    pronoun_idx: int
    desire_idx: int
    action_idx: int
    target_idx: Optional[int] = None
    timing_idx: Optional[int] = None


@dataclass
class InitialLabel:
    segment_id: str
    value: float
    reason: str

    def __post_init__(self) -> None:
        expected = LABEL_REASONS.get(self.reason)
        if expected is None:
            raise ValueError(f"unknown label reason {self.reason!r}")
        if self.value != expected:
            raise ValueError(
                f"label value {self.value} inconsistent with reason {self.reason!r}"
            )


def _desire_word_qualifies(
    token: ParseToken, desire_verbs: Optional[set[str]], extra: set[str]
) -> bool:
    if desire_verbs is None:
        return True
    words = {token.text, token.lemma}
    return bool(words & desire_verbs) or bool(words & extra)


def _first_person_subject(tokens: Sequence[ParseToken], action: ParseToken) -> Optional[ParseToken]:
    for tok in children(tokens, action.index, NSUBJ):
        if tok.text in FIRST_PERSON or tok.lemma in FIRST_PERSON:
            return tok
    return None


def _optional_roles(
    tokens: Sequence[ParseToken], action: ParseToken
) -> tuple[Optional[int], Optional[int]]:
    target = next(
        (t.index for t in children(tokens, action.index, DOBJ) if t.index > action.index),
        None,
    )
    timing = next(
        (t.index for t in children(tokens, action.index, NPADVMOD) if t.index > action.index),
        None,
    )
    return target, timing


def match_template(
    tokens: Sequence[ParseToken], desire_verbs: Optional[set[str]] = None
) -> Optional[TemplateMatch]:
    """Return the first template match scanning action verbs left to right.

    ``desire_verbs=None`` is the initial-round mode where any verb in the
    desire slot qualifies; a set restricts the slot to that vocabulary
    (plus the modal futures for the short form).
    """
    for action in tokens:
        if action.pos != "VERB":
            continue
        pronoun = _first_person_subject(tokens, action)
        if pronoun is None:
            continue

        # short form: desire word is an auxiliary of the action verb
        for aux_tok in children(tokens, action.index, AUX):
            if aux_tok.pos not in {"AUX", "VERB"}:
                continue
            if not _desire_word_qualifies(aux_tok, desire_verbs, SHORT_FORM_EXTRA_DESIRE):
                continue
            if pronoun.index < aux_tok.index < action.index:
                target, timing = _optional_roles(tokens, action)
                return TemplateMatch(
                    "short", pronoun.index, aux_tok.index, action.index, target, timing
                )

        # long form: action verb is an open clausal complement of the
        # desire verb, with "to" as the action's auxiliary
        if action.dep == XCOMP:
            desire = tokens[action.head]
            if desire.pos != "VERB":
                continue
            if not _desire_word_qualifies(desire, desire_verbs, set()):
                continue
            has_to = any(
                t.lemma == "to" or t.text == "to"
                for t in children(tokens, action.index, AUX)
            )
            if not has_to:
                continue
            if pronoun.index < desire.index < action.index:
                target, timing = _optional_roles(tokens, action)
                return TemplateMatch(
                    "long", pronoun.index, desire.index, action.index, target, timing
                )
    return None


def _is_negated(tokens: Sequence[ParseToken], match: TemplateMatch) -> bool:
    for idx in (match.desire_idx, match.action_idx):
        if children(tokens, idx, NEG):
            return True
    return False


def is_question(tokens: Sequence[ParseToken]) -> bool:
    """Terminal question marks survive in parses; otherwise detect
    auxiliary inversion (an auxiliary preceding its verb's subject)."""
    if any(t.text == "?" for t in tokens):
        return True
    for aux_tok in tokens:
        if aux_tok.dep != AUX:
            continue
        for subj in children(tokens, aux_tok.head, NSUBJ):
            if aux_tok.index < subj.index:
                return True
    return False


def _desire_candidates(
    tokens: Sequence[ParseToken], desire_verbs: Optional[set[str]]
) -> list[ParseToken]:
    """Action verbs that carry a qualifying desire word in either slot."""
    out = []
    for action in tokens:
        if action.pos != "VERB":
            continue
        slot = False
        for aux_tok in children(tokens, action.index, AUX):
            if aux_tok.pos in {"AUX", "VERB"} and _desire_word_qualifies(
                aux_tok, desire_verbs, SHORT_FORM_EXTRA_DESIRE
            ):
                slot = True
        if action.dep == XCOMP:
            desire = tokens[action.head]
            if desire.pos == "VERB" and _desire_word_qualifies(desire, desire_verbs, set()):
                slot = True
        if slot:
            out.append(action)
    return out


def initial_label(
    segment: Segment,
    tokens: Optional[Sequence[ParseToken]],
    desire_verbs: Optional[set[str]] = None,
    source: Optional[str] = None,
) -> InitialLabel:
    """Label one segment per the template and nullifier rules."""
    if source in CONTRAST_SOURCES:
        return InitialLabel(segment.segment_id, 0.0, "wikipedia_contrast")
    if not tokens:
        logger.warning("no parse for segment %s; labelling undetermined", segment.segment_id)
        return InitialLabel(segment.segment_id, 0.5, "undetermined")

    match = match_template(tokens, desire_verbs)
    if match is not None:
        if _is_negated(tokens, match):
            return InitialLabel(segment.segment_id, 0.0, "negation")
        if is_question(tokens):
            return InitialLabel(segment.segment_id, 0.0, "question")
        return InitialLabel(segment.segment_id, 1.0, "template_match")

    candidates = _desire_candidates(tokens, desire_verbs)
    if candidates:
        if is_question(tokens):
            return InitialLabel(segment.segment_id, 0.0, "question")
        for action in candidates:
            for subj in children(tokens, action.index, NSUBJ):
                if subj.text in SECOND_PERSON | THIRD_PERSON:
                    return InitialLabel(segment.segment_id, 0.0, "second_or_third_person")
    return InitialLabel(segment.segment_id, 0.5, "undetermined")


def label_corpus(
    segments: Iterable[Segment],
    parses: Mapping[str, Sequence[ParseToken]],
    desire_verbs: Optional[set[str]] = None,
    source_by_doc: Optional[Mapping[str, str]] = None,
) -> tuple[dict[str, InitialLabel], dict]:
    """Label every segment; returns the label map and a class report."""
    labels: dict[str, InitialLabel] = {}
    counts = {"intentful": 0, "non_intentful": 0, "undetermined": 0}
    for seg in segments:
        source = source_by_doc.get(seg.doc_id) if source_by_doc else None
        lab = initial_label(seg, parses.get(seg.segment_id), desire_verbs, source)
        labels[seg.segment_id] = lab
        if lab.value == 1.0:
            counts["intentful"] += 1
        elif lab.value == 0.0:
            counts["non_intentful"] += 1
        else:
            counts["undetermined"] += 1
    total = len(labels)
    report = {
        "total": total,
        "counts": counts,
        "fractions": {
            k: (v / total if total else 0.0) for k, v in counts.items()
        },
    }
    return labels, report


def relabel_retention(
    old_labels: Mapping[str, float], new_labels: Mapping[str, float]
) -> Optional[float]:
    """Fraction of previously-intentful segments still intentful.

    Returns None when there were no previous positives (undefined).
    """
    previous = {s for s, v in old_labels.items() if v == 1.0}
    if not previous:
        return None
    retained = sum(1 for s in previous if new_labels.get(s) == 1.0)
    return retained / len(previous)
