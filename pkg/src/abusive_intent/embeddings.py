"""Word-embedding table: similarity queries and desire-verb expansion.

The table is immutable after loading; every query is read-only. Vectors
use the common text interchange format (header line "<vocab> <dim>",
then one "<word> <f1> ... <fd>" row per line).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EmbeddingFormatError

logger = logging.getLogger(__name__)

SEED_DESIRE_VERBS = ("want", "need", "going", "have", "about", "planning", "will")
DEFAULT_DISTANCE_MULTIPLIER = 2.0


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray]
    oov_policy: str = "zero_vector"

    _matrix: Optional[np.ndarray] = field(default=None, repr=False)
    _words: Optional[list[str]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise ConfigurationError("embedding dimension must be positive")
        for word, vec in self.vectors.items():
            if vec.shape != (self.dimension,):
                raise ConfigurationError(
                    f"vector for {word!r} has shape {vec.shape}, expected ({self.dimension},)"
                )

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def vector(self, word: str) -> np.ndarray:
        vec = self.vectors.get(word)
        if vec is None:
            if self.oov_policy == "zero_vector":
                return np.zeros(self.dimension)
            raise KeyError(f"{word!r} not in vocabulary and no fallback configured")
        return vec

    def dense(self) -> tuple[list[str], np.ndarray]:
        """Vocabulary in sorted order with the row-aligned vector matrix."""
        if self._matrix is None:
            self._words = sorted(self.vectors)
            self._matrix = (
                np.stack([self.vectors[w] for w in self._words])
                if self._words
                else np.zeros((0, self.dimension))
            )
        return self._words, self._matrix


@dataclass
class ConeConfig:
    seeds: Sequence[str] = SEED_DESIRE_VERBS
    distance_multiplier: float = DEFAULT_DISTANCE_MULTIPLIER
    metric: str = "euclidean_to_mean"

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigurationError("seed verb set must be non-empty")
        if self.distance_multiplier <= 0:
            raise ConfigurationError("distance multiplier must be positive")
        if self.metric != "euclidean_to_mean":
            raise ConfigurationError(f"unknown cone metric {self.metric!r}")


def load_embeddings(path: str, oov_policy: str = "zero_vector") -> EmbeddingTable:
    """Parse a text vector file into a table; dimension comes from the header."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{path}: missing header '<vocab> <dim>'")
        try:
            declared_vocab, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}: malformed header {header!r}") from exc
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 and not line.strip():
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} components, found {len(values)}"
                )
            if word in vectors:
                logger.warning("duplicate vector for %r at line %d; last wins", word, lineno)
            vectors[word] = np.asarray([float(v) for v in values])
    if declared_vocab != len(vectors):
        logger.warning(
            "header declares %d words but file holds %d", declared_vocab, len(vectors)
        )
    return EmbeddingTable(dimension=dim, vectors=vectors, oov_policy=oov_policy)


def save_embeddings(table: EmbeddingTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vectors)} {table.dimension}\n")
        for word in sorted(table.vectors):
            row = " ".join(repr(float(v)) for v in table.vectors[word])
            fh.write(f"{word} {row}\n")


def cosine_similarity(w1: str, w2: str, table: EmbeddingTable) -> float:
    """Cosine of the two word vectors; a zero vector compares as 0."""
    a, b = table.vector(w1), table.vector(w2)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        logger.warning("zero vector in cosine(%r, %r); similarity defined as 0", w1, w2)
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def nearest_neighbors(word: str, k: int, table: EmbeddingTable) -> list[tuple[str, float]]:
    """Top-k vocabulary words by cosine, excluding the query; ties lexicographic."""
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    words, matrix = table.dense()
    query = table.vector(word)
    qn = np.linalg.norm(query)
    norms = np.linalg.norm(matrix, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = matrix @ query / (norms * qn)
    sims = np.nan_to_num(sims, nan=0.0, posinf=0.0, neginf=0.0)
    ranked = sorted(
        ((w, float(s)) for w, s in zip(words, sims) if w != word),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[:k]


def expand_desire_verbs(
    config: ConeConfig,
    table: EmbeddingTable,
    candidate_filter: Optional[Callable[[str], bool]] = None,
) -> set[str]:
    """Admit every candidate within the seed cone.

    A candidate passes when its Euclidean distance to the seed mean is
    below ``distance_multiplier`` times the largest seed-to-mean distance.
    Seeds are always members of the result.
    """
    missing = [s for s in config.seeds if s not in table]
    if missing:
        raise ConfigurationError(f"seed verbs missing from embedding table: {missing}")
    seed_vecs = np.stack([table.vector(s) for s in config.seeds])
    mean = seed_vecs.mean(axis=0)
    spread = float(np.max(np.linalg.norm(seed_vecs - mean, axis=1)))
    threshold = config.distance_multiplier * spread

    result = set(config.seeds)
    words, matrix = table.dense()
    distances = np.linalg.norm(matrix - mean, axis=1)
    for w, d in zip(words, distances):
        if w in result:
            continue
        if candidate_filter is not None and not candidate_filter(w):
            continue
        if d < threshold:
            result.add(w)
    return result


def read_word_list(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def write_word_list(words: Iterable[str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(set(words)):
            fh.write(word + "\n")


def train_toy_embeddings(
    sentences: Sequence[Sequence[str]],
    dimension: int = 16,
    window: int = 2,
    epochs: int = 3,
    negatives: int = 3,
    learning_rate: float = 0.05,
    seed: int = 0,
) -> EmbeddingTable:
    """Tiny skip-gram trainer for toy corpora and tests.

    Not a production trainer: plain SGD with negative sampling over an
    in-memory corpus. Real tables are trained externally and loaded.
    """
    rng = np.random.default_rng(seed)
    vocab = sorted({tok for sent in sentences for tok in sent})
    index = {w: i for i, w in enumerate(vocab)}
    n = len(vocab)
    w_in = (rng.random((n, dimension)) - 0.5) / dimension
    w_out = np.zeros((n, dimension))

    def sigmoid(x: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))

    for _ in range(epochs):
        for sent in sentences:
            ids = [index[t] for t in sent]
            for pos, center in enumerate(ids):
                lo = max(0, pos - window)
                hi = min(len(ids), pos + window + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    targets = [(ids[ctx_pos], 1.0)]
                    targets += [(int(rng.integers(0, n)), 0.0) for _ in range(negatives)]
                    v = w_in[center]
                    grad_v = np.zeros(dimension)
                    for tgt, label in targets:
                        score = sigmoid(np.dot(v, w_out[tgt]))
                        g = (score - label) * learning_rate
                        grad_v += g * w_out[tgt]
                        w_out[tgt] -= g * v
                    w_in[center] -= grad_v
    return EmbeddingTable(
        dimension=dimension, vectors={w: w_in[index[w]].copy() for w in vocab}
    )
