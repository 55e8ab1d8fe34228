import numpy as np
import pytest

from abusive_intent.corpus import Segment
from abusive_intent.embeddings import EmbeddingTable
from abusive_intent.parsing import ParseToken


def make_segments(texts, doc_id="d0"):
    return [
        Segment(segment_id=f"{doc_id}#{i}", doc_id=doc_id, index_in_doc=i, text=t)
        for i, t in enumerate(texts)
    ]


def make_parse(rows):
    """rows: (text, pos, dep, head) tuples; lemma defaults to text."""
    tokens = []
    for i, row in enumerate(rows):
        text, pos, dep, head = row[:4]
        lemma = row[4] if len(row) > 4 else text
        tokens.append(ParseToken(index=i, text=text, lemma=lemma, pos=pos, head=head, dep=dep))
    return tokens


def random_table(words, dimension=12, seed=0, unit=True):
    rng = np.random.default_rng(seed)
    vectors = {}
    for w in sorted(set(words)):
        v = rng.normal(size=dimension)
        if unit:
            v = v / np.linalg.norm(v)
        vectors[w] = v
    return EmbeddingTable(dimension=dimension, vectors=vectors)


FILLER_WORDS = [
    "river", "stone", "cloud", "meadow", "lantern", "harbor", "signal",
    "garden", "letter", "bridge", "window", "record", "market", "engine",
    "forest", "shadow", "mirror", "candle", "valley", "anchor",
]

POSITIVE_PATTERNS = [
    "i will crush the towers",
    "i am going to strike soon",
    "we will march tonight",
    "i want to destroy them",
]

NEGATIVE_PATTERNS = [
    "the river flows calmly north",
    "records show the early date",
    "the market opened after dawn",
    "old letters describe the harbor",
]


def planted_corpus(seed=7):
    """500 synthetic segments with planted intent and non-intent grams.

    Returns (segments, initial_values, table): 40 hard positives, 120
    hard negatives, 100/120 undetermined segments carrying the planted
    positive/negative grams, and 120 pure filler segments.
    """
    rng = np.random.default_rng(seed)

    def filler(k):
        return " ".join(rng.choice(FILLER_WORDS, size=k))

    segments = []
    values = {}

    def add(text, value):
        idx = len(segments)
        seg = Segment(f"s{idx:04d}", f"doc{idx // 5}", idx % 5, text)
        segments.append(seg)
        values[seg.segment_id] = value

    for i in range(40):
        add(POSITIVE_PATTERNS[i % len(POSITIVE_PATTERNS)] + " " + filler(2), 1.0)
    for i in range(120):
        add(NEGATIVE_PATTERNS[i % len(NEGATIVE_PATTERNS)] + " " + filler(2), 0.0)
    for i in range(100):
        add(POSITIVE_PATTERNS[i % len(POSITIVE_PATTERNS)] + " " + filler(3), 0.5)
    for i in range(120):
        add(NEGATIVE_PATTERNS[i % len(NEGATIVE_PATTERNS)] + " " + filler(3), 0.5)
    for i in range(120):
        add(filler(6), 0.5)

    vocab = {tok for seg in segments for tok in seg.tokens()}
    table = random_table(vocab, dimension=12, seed=seed)
    return segments, values, table


@pytest.fixture
def planted():
    return planted_corpus()
