"""End-to-end pipeline: staged execution with a content-hashed manifest.

Stages exchange plain line-delimited artifacts inside the output
directory, so any stage can be inspected or replaced. A stage whose
outputs already exist is skipped on resume; deleting an artifact forces
just that stage (and anything reading it afresh) to recompute. The
manifest records per-stage status and a sha256 for every artifact.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Callable, Optional

from . import abuse as abuse_mod
from . import templates
from .bootstrap import Bootstrap, BootstrapConfig, LabelState, write_reports
from .config import RunConfig
from .corpus import preprocess_corpus, read_documents, read_segments, write_segments
from .embeddings import (
    ConeConfig,
    expand_desire_verbs,
    load_embeddings,
    read_word_list,
    write_word_list,
)
from .errors import ConfigurationError
from .ngrams import build_index, save_index
from .parsing import heuristic_parse_corpus, load_parses, write_parses
from .recurrent import SequenceModel, write_history
from .scoring import (
    format_score,
    rank_report,
    score_documents,
    score_segments,
    write_document_scores,
    write_segment_scores,
)

logger = logging.getLogger(__name__)

STAGE_OUTPUTS: dict[str, tuple[str, ...]] = {
    "preprocess": ("segments.jsonl", "documents.jsonl", "corpus_report.json"),
    "parse": ("parses.jsonl",),
    "seed_label": ("initial_labels.jsonl", "label_report.json"),
    "expand_verbs": ("desire_verbs.txt",),
    "bootstrap": (
        "labels.jsonl", "rounds.jsonl", "retention.json",
        "ngram_index.jsonl", "deep_history.jsonl",
    ),
    "train_abuse": (
        "abuse_model.bin", "abuse_manifest.json",
        "abuse_training.json", "abuse_history.jsonl",
    ),
    "score": ("segment_scores.jsonl", "document_scores.jsonl", "top_segments.jsonl"),
}
STAGE_ORDER = tuple(STAGE_OUTPUTS)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, manifest: dict):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.manifest = manifest


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(data, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _doc_sources(out: Path) -> dict[str, str]:
    sources = {}
    with open(out / "documents.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                sources[rec["doc_id"]] = rec["source"]
    return sources


def _read_initial_labels(path: Path) -> dict[str, float]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                labels[rec["segment_id"]] = float(rec["value"])
    return labels


def _load_table(config: RunConfig):
    if not config.paths.embeddings:
        raise ConfigurationError("paths.embeddings is required for this stage")
    table = load_embeddings(config.paths.embeddings)
    if table.dimension != config.model.embedding_dim:
        raise ConfigurationError(
            f"embedding dimension {table.dimension} does not match "
            f"model.embedding_dim {config.model.embedding_dim}"
        )
    return table


# --- stage bodies -----------------------------------------------------------


def _stage_preprocess(config: RunConfig, out: Path) -> None:
    docs = list(read_documents(config.paths.corpus))
    cleaned, segments = preprocess_corpus(docs)
    write_segments(segments, str(out / "segments.jsonl"))
    with open(out / "documents.jsonl", "w", encoding="utf-8") as fh:
        for doc in cleaned:
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc.doc_id,
                        "source": doc.source,
                        "original_chars": doc.original_chars,
                        "processed_chars": len(doc.cleaned_text),
                    }
                )
                + "\n"
            )
    from .corpus import corpus_report

    _write_json(corpus_report(cleaned), out / "corpus_report.json")


def _stage_parse(config: RunConfig, out: Path) -> None:
    segments = read_segments(str(out / "segments.jsonl"))
    if config.paths.parses:
        parses = load_parses(config.paths.parses)
        missing = [s.segment_id for s in segments if s.segment_id not in parses]
        if missing:
            logger.warning("%d segments lack external parses", len(missing))
    else:
        parses = heuristic_parse_corpus(segments)
    write_parses(parses, str(out / "parses.jsonl"))


def _stage_seed_label(config: RunConfig, out: Path) -> None:
    segments = read_segments(str(out / "segments.jsonl"))
    parses = load_parses(str(out / "parses.jsonl"))
    sources = _doc_sources(out)
    labels, report = templates.label_corpus(segments, parses, None, sources)
    with open(out / "initial_labels.jsonl", "w", encoding="utf-8") as fh:
        for seg_id in sorted(labels):
            lab = labels[seg_id]
            fh.write(
                json.dumps(
                    {"segment_id": seg_id, "value": lab.value, "reason": lab.reason}
                )
                + "\n"
            )
    _write_json(report, out / "label_report.json")


def _stage_expand_verbs(config: RunConfig, out: Path) -> None:
    table = _load_table(config)
    parses = load_parses(str(out / "parses.jsonl"))
    verbish: set[str] = set()
    for tokens in parses.values():
        for tok in tokens:
            if tok.pos in ("VERB", "AUX"):
                verbish.add(tok.text)
                verbish.add(tok.lemma)
    cone = ConeConfig(seeds=tuple(config.cone.seeds), distance_multiplier=config.cone.multiplier)
    verbs = expand_desire_verbs(cone, table, candidate_filter=lambda w: w in verbish)
    write_word_list(verbs, str(out / "desire_verbs.txt"))


def _stage_bootstrap(config: RunConfig, out: Path) -> None:
    segments = read_segments(str(out / "segments.jsonl"))
    parses = load_parses(str(out / "parses.jsonl"))
    sources = _doc_sources(out)
    verbs = set(read_word_list(str(out / "desire_verbs.txt")))
    table = _load_table(config)

    round0 = _read_initial_labels(out / "initial_labels.jsonl")
    refined_labels, _ = templates.label_corpus(segments, parses, verbs, sources)
    refined = {s: lab.value for s, lab in refined_labels.items()}
    retention = templates.relabel_retention(round0, refined)
    previous_positive = sum(1 for v in round0.values() if v == 1.0)
    _write_json(
        {
            "retention": retention,
            "previously_intentful": previous_positive,
            "still_intentful": sum(
                1 for s, v in round0.items() if v == 1.0 and refined.get(s) == 1.0
            ),
        },
        out / "retention.json",
    )

    index = build_index(
        segments, config.ngram.n_min, config.ngram.n_max, config.ngram.cap
    )
    save_index(index, str(out / "ngram_index.jsonl"))
    state = LabelState.from_values(refined)
    boot = Bootstrap(
        segments,
        index,
        table,
        config.model,
        BootstrapConfig(
            rounds=config.bootstrap.rounds,
            percentile=config.ngram.percentile,
            smoothing=config.ngram.smoothing,
            amplify_threshold=config.bootstrap.amplify_threshold,
            amplify_factor=config.bootstrap.amplify_factor,
            hard_proposal_threshold=config.bootstrap.hard_proposal_threshold,
            seed=config.seeds.weights,
        ),
    )
    final_state, reports = boot.run(state)
    final_state.save(str(out / "labels.jsonl"))
    write_reports(reports, str(out / "rounds.jsonl"))
    history_path = out / "deep_history.jsonl"
    history_path.write_text("")
    for round_idx, history in boot.histories:
        write_history(history, str(history_path), mode="a", round=round_idx)


def _stage_train_abuse(config: RunConfig, out: Path) -> None:
    if not config.paths.abuse_dir:
        raise ConfigurationError("paths.abuse_dir is required for train_abuse")
    sources_path = Path(config.paths.abuse_dir) / "sources.json"
    with open(sources_path, encoding="utf-8") as fh:
        specs = [
            abuse_mod.SourceSpec(
                name=rec["name"],
                path=str(Path(config.paths.abuse_dir) / rec["path"]),
                format=rec.get("format", "jsonl"),
                text_field=rec.get("text_field", "text"),
                label_fields=tuple(rec.get("label_fields", ["label"])),
                positive_values=tuple(rec.get("positive_values", ["1", "true", "abusive"])),
            )
            for rec in json.load(fh)
        ]
    table = _load_table(config)
    dataset, report = abuse_mod.assemble(specs, seed=config.seeds.shuffle)
    model, summary = abuse_mod.train_abuse(
        dataset, config.model, table, seed=config.seeds.weights
    )
    model.save(str(out / "abuse_model.bin"))
    _write_json(report, out / "abuse_manifest.json")
    history = summary.pop("history")
    _write_json(summary, out / "abuse_training.json")
    write_history(history, str(out / "abuse_history.jsonl"))


def _stage_score(config: RunConfig, out: Path) -> None:
    segments = read_segments(str(out / "segments.jsonl"))
    table = _load_table(config)
    intent_scores = LabelState.load(str(out / "labels.jsonl")).values()
    model = SequenceModel.load(str(out / "abuse_model.bin"))
    abuse_scores = model.predict(segments, table)
    records = score_segments(segments, abuse_scores, intent_scores)
    write_segment_scores(records, str(out / "segment_scores.jsonl"))
    doc_scores = score_documents(segments, abuse_scores, intent_scores, config.score.window)
    write_document_scores(doc_scores, str(out / "document_scores.jsonl"))

    text_by_id = {s.segment_id: s.text for s in segments}
    with open(out / "top_segments.jsonl", "w", encoding="utf-8") as fh:
        for rec in rank_report(records, config.score.top_k):
            fh.write(
                json.dumps(
                    {
                        "segment_id": rec.segment_id,
                        "abuse": format_score(rec.abuse),
                        "intent": format_score(rec.intent),
                        "product": format_score(rec.product),
                        "text": text_by_id.get(rec.segment_id, ""),
                    }
                )
                + "\n"
            )


_STAGE_BODIES: dict[str, Callable[[RunConfig, Path], None]] = {
    "preprocess": _stage_preprocess,
    "parse": _stage_parse,
    "seed_label": _stage_seed_label,
    "expand_verbs": _stage_expand_verbs,
    "bootstrap": _stage_bootstrap,
    "train_abuse": _stage_train_abuse,
    "score": _stage_score,
}


def run_pipeline(config: RunConfig, resume: bool = True) -> dict:
    """Execute all stages; returns the manifest (also written to disk).

    With ``resume`` a stage whose outputs all exist is recorded as cached
    and skipped. A stage failure is recorded in the manifest, prior
    artifacts are preserved, and ``PipelineError`` is raised.
    """
    out = Path(config.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"config": config.to_dict(), "stages": [], "completed": False}
    manifest_path = out / "manifest.json"

    for stage in STAGE_ORDER:
        outputs = [out / name for name in STAGE_OUTPUTS[stage]]
        entry: dict = {"name": stage, "status": "pending", "outputs": {}}
        manifest["stages"].append(entry)
        if resume and all(p.exists() for p in outputs):
            entry["status"] = "cached"
        else:
            try:
                _STAGE_BODIES[stage](config, out)
                entry["status"] = "done"
            except Exception as exc:  # noqa: BLE001 - recorded and re-raised
                entry["status"] = "failed"
                entry["error"] = f"{type(exc).__name__}: {exc}"
                _write_json(manifest, manifest_path)
                raise PipelineError(stage, exc, manifest) from exc
        entry["outputs"] = {p.name: sha256_file(p) for p in outputs}
        _write_json(manifest, manifest_path)

    manifest["completed"] = True
    _write_json(manifest, manifest_path)
    return manifest
