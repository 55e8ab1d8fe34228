"""Command-line entry points.

One verb per pipeline stage plus the annotation service and the
end-to-end runner. Artifacts are plain line-delimited files so stages
can be run, inspected, or replaced independently.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import urllib.request
from pathlib import Path

from . import templates
from .bootstrap import Bootstrap, BootstrapConfig, LabelState, write_reports
from .config import load_config, save_config
from .corpus import corpus_report, preprocess_corpus, read_documents, read_segments, write_segments
from .embeddings import (
    ConeConfig,
    expand_desire_verbs,
    load_embeddings,
    read_word_list,
    write_word_list,
)
from .ngrams import (
    build_index,
    load_index,
    propose_from_index,
    propose_labels,
    save_index,
    score_ngrams,
    select_predictive,
)
from .parsing import heuristic_parse_corpus, load_parses, write_parses
from .recurrent import ModelConfig, SequenceModel, write_history
from .scoring import (
    format_score,
    rank_report,
    score_documents,
    score_segments,
    write_document_scores,
    write_segment_scores,
)

logger = logging.getLogger(__name__)


def _read_label_values(path: str) -> dict[str, float]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                values[rec["segment_id"]] = float(rec["value"])
    return values


def _write_json(data, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _doc_sources_from(path: str) -> dict[str, str]:
    sources = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                sources[rec["doc_id"]] = rec["source"]
    return sources


# --- verbs -------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    docs = list(read_documents(args.infile))
    cleaned, segments = preprocess_corpus(docs)
    write_segments(segments, args.out)
    if args.docs:
        with open(args.docs, "w", encoding="utf-8") as fh:
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
    report = corpus_report(cleaned)
    if args.report:
        _write_json(report, args.report)
    for row in report:
        print(
            f"{row['source']}: {row['unprocessed']} -> {row['processed']} "
            f"({row['removed_pct']}% removed)"
        )
    print(f"{len(segments)} segments from {len(cleaned)} documents")
    return 0


def cmd_parse(args) -> int:
    segments = read_segments(args.segments)
    parses = heuristic_parse_corpus(segments)
    write_parses(parses, args.out)
    print(f"parsed {len(parses)} segments (heuristic parser)")
    return 0


def cmd_seed_label(args) -> int:
    segments = read_segments(args.segments)
    parses = load_parses(args.parses)
    verbs = set(read_word_list(args.verbs)) if args.verbs else None
    sources = _doc_sources_from(args.docs) if args.docs else None
    labels, report = templates.label_corpus(segments, parses, verbs, sources)
    with open(args.out, "w", encoding="utf-8") as fh:
        for seg_id in sorted(labels):
            lab = labels[seg_id]
            fh.write(
                json.dumps(
                    {"segment_id": seg_id, "value": lab.value, "reason": lab.reason}
                )
                + "\n"
            )
    f = report["fractions"]
    print(
        f"labelled {report['total']} segments: "
        f"{100 * f['intentful']:.1f}% intentful / "
        f"{100 * f['non_intentful']:.1f}% non-intentful / "
        f"{100 * f['undetermined']:.1f}% undetermined"
    )
    return 0


def cmd_expand_verbs(args) -> int:
    table = load_embeddings(args.embeddings)
    seeds = read_word_list(args.seeds) if args.seeds else None
    cone = ConeConfig(seeds=tuple(seeds)) if seeds else ConeConfig()
    cone = ConeConfig(seeds=cone.seeds, distance_multiplier=args.multiplier)
    candidate_filter = None
    if args.parses:
        parses = load_parses(args.parses)
        verbish = {
            form
            for tokens in parses.values()
            for tok in tokens
            if tok.pos in ("VERB", "AUX")
            for form in (tok.text, tok.lemma)
        }
        candidate_filter = lambda w: w in verbish  # noqa: E731
    verbs = expand_desire_verbs(cone, table, candidate_filter)
    write_word_list(verbs, args.out)
    print(f"expanded to {len(verbs)} desire verbs")
    return 0


def cmd_ngram_score(args) -> int:
    if not args.index and not args.segments:
        print("ngram-score needs --index or --segments", file=sys.stderr)
        return 2
    if args.index:
        index = load_index(args.index)
    else:
        index = build_index(read_segments(args.segments))
        if args.save_index:
            save_index(index, args.save_index)
    labels = _read_label_values(args.labels)
    scores = score_ngrams(index, labels)
    intentful, non_intentful = select_predictive(scores, args.percentile)
    print(f"{len(intentful)} intentful grams, {len(non_intentful)} non-intentful grams")
    for gram, rate in sorted(intentful.items(), key=lambda kv: -kv[1])[:15]:
        print(f"  {rate:10.2f}  {gram}")
    if args.segments:
        segments = read_segments(args.segments)
        proposals = propose_labels(
            segments, intentful, non_intentful, index.n_min, index.n_max
        )
    else:
        proposals = propose_from_index(index, intentful, non_intentful)
    with open(args.out, "w", encoding="utf-8") as fh:
        for seg_id in sorted(proposals):
            p = proposals[seg_id]
            conf = p.confidence if p.confidence != float("inf") else 1e308
            fh.write(
                json.dumps(
                    {"segment_id": seg_id, "label": p.label, "confidence": conf}
                )
                + "\n"
            )
    print(f"wrote {len(proposals)} proposals to {args.out}")
    return 0


def cmd_bootstrap(args) -> int:
    segments = read_segments(args.segments)
    parses = load_parses(args.parses)
    table = load_embeddings(args.embeddings)
    verbs = set(read_word_list(args.verbs)) if args.verbs else None
    sources = _doc_sources_from(args.docs) if args.docs else None
    labels, _ = templates.label_corpus(segments, parses, verbs, sources)
    state = LabelState.from_values({s: lab.value for s, lab in labels.items()})

    model_config = ModelConfig(
        max_tokens=args.max_tokens,
        embedding_dim=table.dimension,
        recurrent_units=args.units,
        attention_dim=2 * args.units,
        dense_units=args.dense_units,
    )
    index = build_index(segments)
    boot = Bootstrap(
        segments, index, table, model_config,
        BootstrapConfig(rounds=args.rounds, seed=args.seed),
    )
    final_state, reports = boot.run(state)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    final_state.save(str(out_dir / "labels.jsonl"))
    write_reports(reports, str(out_dir / "rounds.jsonl"))
    n_p, n_n = final_state.counts()
    print(f"bootstrap finished after {len(reports)} rounds: {n_p} locked positive, {n_n} locked negative")
    return 0


def cmd_train_abuse(args) -> int:
    from . import abuse as abuse_mod

    with open(Path(args.data) / "sources.json", encoding="utf-8") as fh:
        specs = [
            abuse_mod.SourceSpec(
                name=rec["name"],
                path=str(Path(args.data) / rec["path"]),
                format=rec.get("format", "jsonl"),
                text_field=rec.get("text_field", "text"),
                label_fields=tuple(rec.get("label_fields", ["label"])),
                positive_values=tuple(rec.get("positive_values", ["1", "true", "abusive"])),
            )
            for rec in json.load(fh)
        ]
    table = load_embeddings(args.embeddings)
    dataset, report = abuse_mod.assemble(specs, seed=args.seed)
    config = ModelConfig(
        max_tokens=args.max_tokens,
        embedding_dim=table.dimension,
        recurrent_units=args.units,
        attention_dim=2 * args.units,
        dense_units=args.dense_units,
    )
    model, summary = abuse_mod.train_abuse(dataset, config, table, seed=args.seed)
    model.save(args.out)
    if args.manifest:
        _write_json(report, args.manifest)
    if args.history:
        write_history(summary["history"], args.history)
    print(
        f"ensemble of {report['ensemble']['size']} records "
        f"({100 * report['ensemble']['abusive_fraction']:.1f}% abusive); "
        f"held-out accuracy {summary['test_accuracy']:.3f}"
    )
    return 0


def cmd_score(args) -> int:
    segments = read_segments(args.segments)
    table = load_embeddings(args.embeddings)
    intent_scores = _read_label_values(args.intent_labels)
    model = SequenceModel.load(args.abuse_model)
    abuse_scores = model.predict(segments, table)
    records = score_segments(segments, abuse_scores, intent_scores)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_segment_scores(records, str(out_dir / "segment_scores.jsonl"))
    doc_scores = score_documents(segments, abuse_scores, intent_scores)
    write_document_scores(doc_scores, str(out_dir / "document_scores.jsonl"))
    text_by_id = {s.segment_id: s.text for s in segments}
    print(f"{'abuse':>7} {'intent':>7} {'product':>8}  segment")
    for rec in rank_report(records, args.top):
        print(
            f"{format_score(rec.abuse):>7} {format_score(rec.intent):>7} "
            f"{format_score(rec.product):>8}  {text_by_id.get(rec.segment_id, '')[:80]}"
        )
    return 0


def cmd_serve_annotation(args) -> int:
    from .annotation import AnnotationService, default_qualifiers, load_qualifiers
    from .annotation_api import serve

    segments = read_segments(args.segments)
    texts = {s.segment_id: s.text for s in segments}
    intent_scores = _read_label_values(args.labels)
    abuse_scores = _read_label_values(args.abuse_scores) if args.abuse_scores else None
    qualifiers = load_qualifiers(args.qualifiers) if args.qualifiers else default_qualifiers()
    service = AnnotationService(
        texts=texts,
        intent_scores=intent_scores,
        qualifiers=qualifiers,
        abuse_scores=abuse_scores,
        pool_size=args.pool,
        seed=args.seed,
        event_log_path=args.event_log,
    )
    print(f"serving annotation study on {args.host}:{args.port} "
          f"(pool of {service.pool.initial_size})")
    serve(service, host=args.host, port=args.port)
    return 0


def cmd_agreement_report(args) -> int:
    with urllib.request.urlopen(args.url) as resp:
        report = json.loads(resp.read().decode("utf-8"))
    if args.out:
        _write_json(report, args.out)
    intent = report.get("intent", {})
    if intent.get("resolved"):
        print(
            f"intent agreement over {intent['resolved']} resolved segments: "
            f"binary {100 * intent['binary_agreement']:.0f}%, "
            f"weighted {100 * intent['weighted_agreement']:.0f}%"
        )
    else:
        print("no resolved segments yet")
    return 0


def cmd_run_all(args) -> int:
    from .pipeline import PipelineError, run_pipeline

    config = load_config(args.config)
    if args.print_config:
        save_config(config, args.print_config)
    try:
        manifest = run_pipeline(config, resume=not args.no_resume)
    except PipelineError as exc:
        print(f"pipeline failed at stage {exc.stage}: {exc}", file=sys.stderr)
        return 1
    for stage in manifest["stages"]:
        print(f"{stage['name']}: {stage['status']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abintent",
        description="Bootstrapped abusive-intent detection pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and segment a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--docs", help="write per-document metadata here")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("parse", help="heuristic-parse segments (toy corpora)")
    p.add_argument("--segments", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("seed-label", help="template-match initial labels")
    p.add_argument("--segments", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--verbs", help="desire-verb list; omit for the any-verb first round")
    p.add_argument("--docs", help="document metadata for contrast-source labelling")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seed_label)

    p = sub.add_parser("expand-verbs", help="cone expansion of the seed verbs")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--seeds", help="seed verb list file (defaults to the built-in seven)")
    p.add_argument("--multiplier", type=float, default=2.0)
    p.add_argument("--parses", help="restrict candidates to parsed verbs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expand_verbs)

    p = sub.add_parser("ngram-score", help="rate n-grams and propose labels")
    p.add_argument("--index", help="prebuilt index file")
    p.add_argument("--segments", help="segment store (to build the index or propose)")
    p.add_argument("--save-index")
    p.add_argument("--labels", required=True)
    p.add_argument("--percentile", type=float, default=99.9)
    p.add_argument("--out", default="proposals.jsonl")
    p.set_defaults(func=cmd_ngram_score)

    p = sub.add_parser("bootstrap", help="run co-training rounds")
    p.add_argument("--segments", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--verbs")
    p.add_argument("--docs")
    p.add_argument("--rounds", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=200)
    p.add_argument("--units", type=int, default=200)
    p.add_argument("--dense-units", type=int, default=50)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("train-abuse", help="assemble the ensemble and train the abuse model")
    p.add_argument("--data", required=True, help="directory with sources.json")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--history", help="write per-epoch training history here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=200)
    p.add_argument("--units", type=int, default=200)
    p.add_argument("--dense-units", type=int, default=50)
    p.set_defaults(func=cmd_train_abuse)

    p = sub.add_parser("score", help="fuse abuse and intent scores")
    p.add_argument("--abuse-model", required=True)
    p.add_argument("--intent-labels", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--top", type=int, default=50)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("serve-annotation", help="run the human-validation service")
    p.add_argument("--labels", required=True, help="intent score file sampled from")
    p.add_argument("--segments", required=True)
    p.add_argument("--abuse-scores")
    p.add_argument("--qualifiers")
    p.add_argument("--pool", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--event-log")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve_annotation)

    p = sub.add_parser("agreement-report", help="fetch the live agreement report")
    p.add_argument("--url", default="http://127.0.0.1:8765/api/v1/report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_agreement_report)

    p = sub.add_parser("run-all", help="run the whole pipeline from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--no-resume", action="store_true")
    p.add_argument("--print-config", help="write the resolved config here")
    p.set_defaults(func=cmd_run_all)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
