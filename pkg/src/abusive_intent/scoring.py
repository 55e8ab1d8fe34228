"""Score fusion and windowed document scoring.

A segment's abusive-intent score is the product of its abuse and intent
scores, so only segments high in both stand out. Document scores slide a
three-segment window: the window score pairs the maximum abuse with the
maximum intent inside it (abuse in one segment can segue into intent in
the next), and the document takes the best window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Segment

DOCUMENT_WINDOW = 3


@dataclass
class ScoreRecord:
    segment_id: str
    abuse: float
    intent: float
    product: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.product is None:
            self.product = abusive_intent(self.abuse, self.intent)


@dataclass
class DocumentScore:
    doc_id: str
    window_scores: list[float]
    doc_score: float
    argmax_window: int = 0


def abusive_intent(abuse: float, intent: float) -> float:
    """Product fusion; both inputs must lie in [0, 1]."""
    if not 0.0 <= abuse <= 1.0:
        raise ValueError(f"abuse score {abuse} outside [0, 1]")
    if not 0.0 <= intent <= 1.0:
        raise ValueError(f"intent score {intent} outside [0, 1]")
    return abuse * intent


def score_segments(
    segments: Iterable[Segment],
    abuse_scores: Mapping[str, float],
    intent_scores: Mapping[str, float],
) -> list[ScoreRecord]:
    return [
        ScoreRecord(
            segment_id=seg.segment_id,
            abuse=abuse_scores[seg.segment_id],
            intent=intent_scores[seg.segment_id],
        )
        for seg in segments
    ]


def document_score(
    segments: Sequence[Segment],
    abuse_scores: Mapping[str, float],
    intent_scores: Mapping[str, float],
    window: int = DOCUMENT_WINDOW,
) -> DocumentScore:
    """Best windowed (max abuse x max intent) over a document's segments.

    Documents shorter than the window use a single window over all their
    segments; an empty document scores 0 with no windows.
    """
    ordered = sorted(segments, key=lambda s: s.index_in_doc)
    doc_id = ordered[0].doc_id if ordered else ""
    if not ordered:
        return DocumentScore(doc_id=doc_id, window_scores=[], doc_score=0.0)
    abuse = [abuse_scores[s.segment_id] for s in ordered]
    intent = [intent_scores[s.segment_id] for s in ordered]
    n = len(ordered)
    if n < window:
        spans = [(0, n)]
    else:
        spans = [(i, i + window) for i in range(n - window + 1)]
    window_scores = [
        abusive_intent(max(abuse[lo:hi]), max(intent[lo:hi])) for lo, hi in spans
    ]
    best = max(range(len(window_scores)), key=lambda i: (window_scores[i], -i))
    return DocumentScore(
        doc_id=doc_id,
        window_scores=window_scores,
        doc_score=window_scores[best],
        argmax_window=best,
    )


def score_documents(
    segments: Iterable[Segment],
    abuse_scores: Mapping[str, float],
    intent_scores: Mapping[str, float],
    window: int = DOCUMENT_WINDOW,
) -> list[DocumentScore]:
    by_doc: dict[str, list[Segment]] = {}
    for seg in segments:
        by_doc.setdefault(seg.doc_id, []).append(seg)
    return [
        document_score(by_doc[doc_id], abuse_scores, intent_scores, window)
        for doc_id in sorted(by_doc)
    ]


def rank_report(
    records: Sequence[ScoreRecord], top_k: int, key: str = "product"
) -> list[ScoreRecord]:
    """Descending ranking by the requested score; ids break ties."""
    if key not in ("product", "abuse", "intent"):
        raise ValueError(f"unknown ranking key {key!r}")
    ranked = sorted(records, key=lambda r: (-getattr(r, key), r.segment_id))
    return ranked[: top_k if top_k >= 0 else len(ranked)]


def format_score(value: float) -> str:
    return f"{value:.3f}"


def write_segment_scores(records: Iterable[ScoreRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "segment_id": rec.segment_id,
                        "abuse": rec.abuse,
                        "intent": rec.intent,
                        "product": rec.product,
                    }
                )
                + "\n"
            )


def read_segment_scores(path: str) -> list[ScoreRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(
                ScoreRecord(
                    segment_id=rec["segment_id"],
                    abuse=float(rec["abuse"]),
                    intent=float(rec["intent"]),
                    product=float(rec["product"]),
                )
            )
    return out


def write_document_scores(doc_scores: Iterable[DocumentScore], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ds in doc_scores:
            fh.write(
                json.dumps(
                    {
                        "doc_id": ds.doc_id,
                        "doc_score": ds.doc_score,
                        "argmax_window": ds.argmax_window,
                        "window_scores": ds.window_scores,
                    }
                )
                + "\n"
            )
