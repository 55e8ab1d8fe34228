"""Corpus ingestion: cleaning rules, segmentation, and reduction reporting.

Cleaning is total (never raises) and idempotent. Documents are split into
segments at sentence-final punctuation and semicolons; segments are the
atomic unit every later stage scores.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

SOURCES = {"stormfront", "wikipedia", "ironmarch", "manifesto", "abuse_corpus", "other"}

SEGMENT_DELIMITERS = ".!?;"

# Quoted material is detected from markup; forum dumps also carry bare
# "Quote:" prefix lines which are dropped whole.
_QUOTE_BLOCK_RE = re.compile(
    r"<\s*(blockquote|quote|q)\b[^>]*>.*?<\s*/\s*\1\s*>",
    re.IGNORECASE | re.DOTALL,
)
_TAG_RE = re.compile(r"<[^<>]+>")
_QUOTE_LINE_RE = re.compile(r"^\s*quote\s*:", re.IGNORECASE)
_HANDLE_RE = re.compile(r"(?<!\w)(?:@\w+)+")  # runs of handles drop in one match
_HASHTAG_RE = re.compile(r"#+(\w+)")
_NON_ASCII_RE = re.compile(r"[^\x20-\x7e\t\n\r]")
_REPEAT_RE = re.compile(r"(.)\1{2,}")
_WS_RE = re.compile(r"\s+")
_SPLIT_RE = re.compile(r"[%s]+" % re.escape(SEGMENT_DELIMITERS))


@dataclass
class RawDocument:
    doc_id: str
    source: str
    text: str
    markup: bool = False


@dataclass
class CleanDocument:
    doc_id: str
    source: str
    cleaned_text: str
    original_chars: int
    removed_chars: int


@dataclass
class Segment:
    segment_id: str
    doc_id: str
    index_in_doc: int
    text: str
    token_count: int = field(default=0)

    def __post_init__(self) -> None:
        if not self.token_count:
            self.token_count = len(self.text.split())

    def tokens(self) -> list[str]:
        return self.text.split()


def _strip_markup(text: str) -> str:
    """Remove quote blocks with their content, then remaining tags.

    Entities are decoded first and tag stripping iterates to a fixpoint,
    so no pass can mint tags that a later pass would remove.
    """
    text = html.unescape(text)
    for _ in range(10):
        stripped = _QUOTE_BLOCK_RE.sub(" ", text)
        stripped = _TAG_RE.sub(" ", stripped)
        if stripped == text:
            break
        text = stripped
    return text


def _split_camel_case(word: str) -> str:
    word = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", word)
    return re.sub(r"(?<=[A-Z])(?=[A-Z][a-z])", " ", word)


def clean_text(raw: str, markup: bool = False) -> str:
    """Apply the cleaning rules to a raw text blob.

    Removes quotations (markup-delimited blocks and "Quote:" lines), user
    handles, html tags, and everything outside printable ASCII (emoji and
    other unicode become spaces so words are never glued together).
    Hashtag content is kept, split at camel-case boundaries. Character
    runs longer than two collapse to two, and whitespace collapses to
    single spaces. Case is preserved; see ``clean_document`` for folding.
    """
    if not raw:
        return ""
    text = raw
    if markup:
        text = _strip_markup(text)
    # the ASCII filter runs first: stripped characters would otherwise
    # shield handle/hashtag/quote patterns from one pass and expose them
    # to the next, breaking idempotence
    text = _NON_ASCII_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(lambda m: _split_camel_case(m.group(1)), text)
    text = _HANDLE_RE.sub(" ", text)
    lines = [ln for ln in text.splitlines() if not _QUOTE_LINE_RE.match(ln)]
    text = "\n".join(lines) if lines else ""
    text = _WS_RE.sub(" ", text).strip()
    text = _REPEAT_RE.sub(r"\1\1", text)
    return text


def clean_document(doc: RawDocument) -> CleanDocument:
    """Clean one document and fold case; removal is accounted in characters."""
    cleaned = clean_text(doc.text, doc.markup).lower()
    original = len(doc.text)
    return CleanDocument(
        doc_id=doc.doc_id,
        source=doc.source,
        cleaned_text=cleaned,
        original_chars=original,
        removed_chars=original - len(cleaned),
    )


def segment_document(doc: CleanDocument) -> list[Segment]:
    """Split a cleaned document at sentence boundaries and semicolons.

    Delimiters are dropped, empty fragments discarded, and indexes run
    consecutively from 0. An empty document yields no segments.
    """
    segments: list[Segment] = []
    for part in _SPLIT_RE.split(doc.cleaned_text):
        text = part.strip()
        if not text:
            continue
        idx = len(segments)
        segments.append(
            Segment(
                segment_id=f"{doc.doc_id}#{idx}",
                doc_id=doc.doc_id,
                index_in_doc=idx,
                text=text,
            )
        )
    return segments


def corpus_report(docs: Iterable[CleanDocument]) -> list[dict]:
    """Aggregate per-source character reduction.

    Returns rows of {source, unprocessed, processed, removed_pct} where
    removed_pct is the removed fraction rendered to one decimal.
    """
    totals: dict[str, list[int]] = {}
    for doc in docs:
        row = totals.setdefault(doc.source, [0, 0])
        row[0] += doc.original_chars
        row[1] += len(doc.cleaned_text)
    report = []
    for source, (unprocessed, processed) in totals.items():
        removed = unprocessed - processed
        pct = 100.0 * removed / unprocessed if unprocessed else 0.0
        report.append(
            {
                "source": source,
                "unprocessed": unprocessed,
                "processed": processed,
                "removed_pct": f"{pct:.1f}",
            }
        )
    return report


# --- line-delimited IO ---------------------------------------------------


def read_documents(path: str) -> Iterator[RawDocument]:
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            doc_id = str(rec["doc_id"])
            if doc_id in seen:
                raise ValueError(f"duplicate doc_id {doc_id!r} at line {lineno}")
            seen.add(doc_id)
            source = rec.get("source", "other")
            if source not in SOURCES:
                raise ValueError(f"unknown source {source!r} at line {lineno}")
            yield RawDocument(
                doc_id=doc_id,
                source=source,
                text=rec.get("text", "") or "",
                markup=bool(rec.get("markup", False)),
            )


def write_segments(segments: Iterable[Segment], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seg in segments:
            fh.write(
                json.dumps(
                    {
                        "segment_id": seg.segment_id,
                        "doc_id": seg.doc_id,
                        "index_in_doc": seg.index_in_doc,
                        "text": seg.text,
                        "token_count": seg.token_count,
                    },
                    ensure_ascii=True,
                )
                + "\n"
            )


def read_segments(path: str) -> list[Segment]:
    segments = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            segments.append(
                Segment(
                    segment_id=rec["segment_id"],
                    doc_id=rec["doc_id"],
                    index_in_doc=int(rec["index_in_doc"]),
                    text=rec["text"],
                    token_count=int(rec.get("token_count", 0)),
                )
            )
    return segments


def preprocess_corpus(
    docs: Iterable[RawDocument],
) -> tuple[list[CleanDocument], list[Segment]]:
    """Clean and segment a corpus in one pass, preserving document order."""
    cleaned: list[CleanDocument] = []
    segments: list[Segment] = []
    for raw in docs:
        doc = clean_document(raw)
        cleaned.append(doc)
        segments.extend(segment_document(doc))
    return cleaned, segments
