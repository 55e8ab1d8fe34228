"""Dependency-parse plumbing.

The template matcher consumes token-level parses produced by an external
statistical parser and exchanged as line-delimited records. A small
deterministic heuristic parser is included for toy corpora and demos so
the pipeline can run end to end without external tooling; it recognizes
only the simple subject/auxiliary/verb shapes the intent templates need
and is not a general parser.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

# Canonical dependency labels used by the matcher. External tag sets are
# translated through an alias table at load time.
NSUBJ = "nsubj"
AUX = "aux"
DOBJ = "dobj"
XCOMP = "xcomp"
NPADVMOD = "npadvmod"
NEG = "neg"
ROOT = "root"
OTHER = "dep"

DEP_ALIASES: dict[str, str] = {
    "obj": DOBJ,
    "nsubj:pass": NSUBJ,
    "nsubjpass": NSUBJ,
    "advmod:npmod": NPADVMOD,
    "obl:npmod": NPADVMOD,
}

FIRST_PERSON = {"i", "we"}
SECOND_PERSON = {"you"}
THIRD_PERSON = {"he", "she", "it", "they", "one"}
PRONOUNS = FIRST_PERSON | SECOND_PERSON | THIRD_PERSON

_AUX_WORDS = {
    "will", "would", "shall", "should", "can", "could", "may", "might",
    "must", "am", "is", "are", "was", "were", "be", "been", "being",
    "do", "does", "did", "have", "has", "had", "ll", "gonna", "going",
    "about",
}
# auxiliary-looking words that open a "<verb> to <verb>" complement
_COMPLEMENT_TAKERS = {"going", "gonna", "have", "about", "had", "has"}
_NEG_WORDS = {"not", "never", "nt"}
_DET_WORDS = {"the", "a", "an", "this", "that", "these", "those",
              "my", "your", "our", "their", "his", "her", "its", "some"}
_TIME_WORDS = {"today", "tomorrow", "tonight", "soon", "now", "later",
               "someday", "yesterday"}
_LEMMA_FIXES = {"ll": "will", "wont": "will", "gonna": "going"}


@dataclass
class ParseToken:
    index: int
    text: str
    lemma: str
    pos: str
    head: int
    dep: str


def validate_parse(tokens: Sequence[ParseToken]) -> None:
    roots = [t for t in tokens if t.head == t.index]
    if len(roots) != 1:
        raise ValueError(f"parse must have exactly one root, found {len(roots)}")
    for t in tokens:
        if not 0 <= t.head < len(tokens):
            raise ValueError(f"token {t.index} head {t.head} out of range")


def children(tokens: Sequence[ParseToken], head: int, dep: Optional[str] = None) -> list[ParseToken]:
    return [
        t for t in tokens
        if t.head == head and t.index != head and (dep is None or t.dep == dep)
    ]


def load_parses(
    path: str, dep_map: Optional[Mapping[str, str]] = None
) -> dict[str, list[ParseToken]]:
    """Read {segment_id, tokens:[...]} records, translating dependency tags."""
    aliases = dict(DEP_ALIASES)
    if dep_map:
        aliases.update(dep_map)
    parses: dict[str, list[ParseToken]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            tokens = [
                ParseToken(
                    index=int(t["index"]),
                    text=t["text"],
                    lemma=t.get("lemma", t["text"]),
                    pos=t.get("pos", "X"),
                    head=int(t["head"]),
                    dep=aliases.get(t.get("dep", OTHER), t.get("dep", OTHER)),
                )
                for t in rec["tokens"]
            ]
            validate_parse(tokens)
            parses[rec["segment_id"]] = tokens
    return parses


def write_parses(parses: Mapping[str, Sequence[ParseToken]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for segment_id in sorted(parses):
            rec = {
                "segment_id": segment_id,
                "tokens": [
                    {
                        "index": t.index,
                        "text": t.text,
                        "lemma": t.lemma,
                        "pos": t.pos,
                        "head": t.head,
                        "dep": t.dep,
                    }
                    for t in parses[segment_id]
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=True) + "\n")


def _lemma(word: str) -> str:
    return _LEMMA_FIXES.get(word, word)


def heuristic_parse(text: str) -> list[ParseToken]:
    """Build a flat, deterministic parse of a cleaned lowercase segment.

    Finds the first open-class token after the subject/auxiliary prefix
    and roots the sentence there; a following "to <verb>" becomes an open
    clausal complement whose subject is the pronoun, mirroring the long
    intent construction. Unrecognized tokens hang off the root.
    """
    words = text.split()
    if not words:
        return []
    n = len(words)
    pos = ["X"] * n
    head = list(range(n))
    dep = [OTHER] * n

    for i, w in enumerate(words):
        if w in PRONOUNS:
            pos[i] = "PRON"
        elif w in _NEG_WORDS or w == "to":
            pos[i] = "PART"
        elif w in _DET_WORDS:
            pos[i] = "DET"
        elif w in _AUX_WORDS:
            pos[i] = "AUX"

    subj: Optional[int] = None
    auxes: list[int] = []
    negs: list[int] = []
    main: Optional[int] = None
    for i, w in enumerate(words):
        if pos[i] == "PRON":
            if subj is None:
                subj = i
            continue
        if w == "to" or pos[i] == "DET":
            continue
        if w in _NEG_WORDS:
            negs.append(i)
            continue
        if pos[i] == "AUX":
            if w in _COMPLEMENT_TAKERS and i + 2 < n and words[i + 1] == "to":
                main = i
                break
            auxes.append(i)
            continue
        main = i
        break

    if main is None:
        root = subj if subj is not None else 0
        for i in range(n):
            head[i], dep[i] = root, OTHER
        head[root], dep[root] = root, ROOT
        tokens = [
            ParseToken(i, words[i], _lemma(words[i]), pos[i], head[i], dep[i])
            for i in range(n)
        ]
        validate_parse(tokens)
        return tokens

    pos[main] = "VERB"
    long_form = main + 2 < n and words[main + 1] == "to" and pos[main + 2] != "DET"
    if long_form:
        desire, to_idx, action = main, main + 1, main + 2
        pos[action] = "VERB"
        root = desire
        head[desire], dep[desire] = desire, ROOT
        head[to_idx], dep[to_idx] = action, AUX
        head[action], dep[action] = desire, XCOMP
        attach_to = action
        aux_owner = desire
    else:
        root = main
        head[main], dep[main] = main, ROOT
        attach_to = main
        aux_owner = main

    if subj is not None:
        head[subj], dep[subj] = attach_to, NSUBJ
    for a in auxes:
        head[a], dep[a] = aux_owner, AUX
    for g in negs:
        head[g], dep[g] = (aux_owner if g < main else attach_to), NEG

    obj_found = False
    for i in range(attach_to + 1, n):
        w = words[i]
        if w in _NEG_WORDS:
            head[i], dep[i] = attach_to, NEG
        elif w in _TIME_WORDS:
            pos[i] = "NOUN"
            head[i], dep[i] = attach_to, NPADVMOD
        elif pos[i] == "DET":
            head[i], dep[i] = attach_to, OTHER
        elif not obj_found and pos[i] in {"X", "PRON"}:
            if pos[i] == "X":
                pos[i] = "NOUN"
            head[i], dep[i] = attach_to, DOBJ
            obj_found = True
        else:
            if pos[i] == "X":
                pos[i] = "NOUN"
            head[i], dep[i] = attach_to, OTHER
    for i in range(n):
        if head[i] == i and dep[i] != ROOT:
            head[i], dep[i] = root, OTHER

    tokens = [
        ParseToken(i, words[i], _lemma(words[i]), pos[i], head[i], dep[i])
        for i in range(n)
    ]
    validate_parse(tokens)
    return tokens


def heuristic_parse_corpus(segments: Iterable) -> dict[str, list[ParseToken]]:
    return {seg.segment_id: heuristic_parse(seg.text) for seg in segments}
