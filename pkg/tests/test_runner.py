import json
import os
from pathlib import Path

import pytest

from abusive_intent.cli import main as cli_main
from abusive_intent.config import RunConfig, load_config, save_config
from abusive_intent.errors import ConfigurationError
from abusive_intent.pipeline import STAGE_ORDER, PipelineError, run_pipeline

from conftest import random_table
from abusive_intent.embeddings import SEED_DESIRE_VERBS, save_embeddings


INTENT_DOCS = [
    "i will crush the towers. the wind was cold",
    "i want to destroy them; we will march tonight",
    "i am going to strike soon. records show the date",
    "we need to unite now. i will give them nothing",
]
FILLER_DOCS = [
    "the river flows calmly north. stones line the path",
    "old letters describe the harbor; the market opened after dawn",
    "clouds gather slowly over the valley. lanterns glow at dusk",
]
WIKI_DOCS = [
    "the bridge was completed in spring. engineers praised the design",
    "the region exports grain and timber; records begin in the archive",
    "the museum holds early maps. visitors arrive by train",
]
ABUSE_POS = ["you are worthless trash", "they are vile idiots", "what a stupid clown"]
ABUSE_NEG = ["the garden looks lovely", "thanks for the kind reply", "the meeting went well"]


def build_toy_project(root: Path, out_name="out") -> Path:
    corpus = root / "corpus.jsonl"
    with open(corpus, "w", encoding="utf-8") as fh:
        for i, text in enumerate(INTENT_DOCS + FILLER_DOCS):
            fh.write(json.dumps(
                {"doc_id": f"sf{i}", "source": "stormfront", "text": text}) + "\n")
        for i, text in enumerate(WIKI_DOCS):
            fh.write(json.dumps(
                {"doc_id": f"wk{i}", "source": "wikipedia", "text": text}) + "\n")

    vocab = set()
    for text in INTENT_DOCS + FILLER_DOCS + WIKI_DOCS + ABUSE_POS + ABUSE_NEG:
        vocab.update(text.replace(".", " ").replace(";", " ").lower().split())
    vocab.update(SEED_DESIRE_VERBS)
    table = random_table(vocab, dimension=10, seed=21)
    embeddings = root / "vectors.txt"
    save_embeddings(table, str(embeddings))

    abuse_dir = root / "abuse"
    abuse_dir.mkdir(exist_ok=True)
    with open(abuse_dir / "toy.jsonl", "w", encoding="utf-8") as fh:
        for text in ABUSE_POS * 4:
            fh.write(json.dumps({"text": text, "label": 1}) + "\n")
        for text in ABUSE_NEG * 4:
            fh.write(json.dumps({"text": text, "label": 0}) + "\n")
    with open(abuse_dir / "sources.json", "w", encoding="utf-8") as fh:
        json.dump([{"name": "toy", "path": "toy.jsonl"}], fh)

    config_path = root / "config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "paths": {
                    "corpus": str(corpus),
                    "embeddings": str(embeddings),
                    "abuse_dir": str(abuse_dir),
                    "output_dir": str(root / out_name),
                },
                "model": {
                    "max_tokens": 8,
                    "embedding_dim": 10,
                    "recurrent_units": 4,
                    "attention_dim": 8,
                    "dense_units": 4,
                    "batch_size": 16,
                    "max_epochs": 4,
                    "patience": 2,
                },
                "bootstrap": {"rounds": 3},
                "score": {"top_k": 10},
            },
            fh,
        )
    return config_path


class TestLoadConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        config = load_config(str(path))
        assert config == RunConfig()
        assert config.ngram.cap == 500_000
        assert config.ngram.percentile == 99.9
        assert config.cone.multiplier == 2.0
        assert config.bootstrap.rounds == 6
        assert config.bootstrap.amplify_factor == 0.10
        assert (config.ngram.n_min, config.ngram.n_max) == (3, 6)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"ngrams": {}}')
        with pytest.raises(ConfigurationError, match="unknown config keys"):
            load_config(str(path))

    def test_percentile_101_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"ngram": {"percentile": 101}}')
        with pytest.raises(ConfigurationError):
            load_config(str(path))

    def test_roundtrip_identical(self, tmp_path):
        config = RunConfig()
        config.paths.corpus = "some/corpus.jsonl"
        config.ngram.percentile = 95.0
        path = tmp_path / "cfg.json"
        save_config(config, str(path))
        assert load_config(str(path)) == config

    def test_env_override_paths_only(self, tmp_path, monkeypatch):
        path = tmp_path / "cfg.json"
        path.write_text("{}")
        monkeypatch.setenv("ABINTENT_CORPUS", "/elsewhere/corpus.jsonl")
        config = load_config(str(path))
        assert config.paths.corpus == "/elsewhere/corpus.jsonl"


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    config_path = build_toy_project(root)
    config = load_config(str(config_path))
    manifest = run_pipeline(config, resume=False)
    return root, config, manifest


class TestPipeline:
    def test_manifest_has_seven_done_stages(self, toy_run):
        _, _, manifest = toy_run
        assert [s["name"] for s in manifest["stages"]] == list(STAGE_ORDER)
        assert len(manifest["stages"]) == 7
        assert all(s["status"] == "done" for s in manifest["stages"])
        assert manifest["completed"]

    def test_artifacts_exist_and_hashed(self, toy_run):
        root, config, manifest = toy_run
        out = Path(config.paths.output_dir)
        for stage in manifest["stages"]:
            for name, digest in stage["outputs"].items():
                assert (out / name).exists()
                assert len(digest) == 64

    def test_bootstrap_found_both_classes(self, toy_run):
        root, config, _ = toy_run
        out = Path(config.paths.output_dir)
        labels = [json.loads(l) for l in (out / "labels.jsonl").read_text().splitlines()]
        values = {l["segment_id"]: l["value"] for l in labels}
        assert any(v == 1.0 for v in values.values())
        assert any(v == 0.0 for v in values.values())
        retention = json.loads((out / "retention.json").read_text())
        assert "retention" in retention

    def test_scores_cover_all_segments(self, toy_run):
        root, config, _ = toy_run
        out = Path(config.paths.output_dir)
        n_segments = len((out / "segments.jsonl").read_text().splitlines())
        n_scores = len((out / "segment_scores.jsonl").read_text().splitlines())
        assert n_scores == n_segments
        docs = [json.loads(l) for l in (out / "document_scores.jsonl").read_text().splitlines()]
        assert all(0.0 <= d["doc_score"] <= 1.0 for d in docs)

    def test_rerun_with_unchanged_inputs_identical_hashes(self, toy_run, tmp_path_factory):
        root, config, manifest = toy_run
        root2 = tmp_path_factory.mktemp("toy2")
        config_path2 = build_toy_project(root2)
        manifest2 = run_pipeline(load_config(str(config_path2)), resume=False)
        h1 = {s["name"]: s["outputs"] for s in manifest["stages"]}
        h2 = {s["name"]: s["outputs"] for s in manifest2["stages"]}
        assert h1 == h2

    def test_resume_recomputes_only_missing_stage(self, toy_run):
        root, config, _ = toy_run
        out = Path(config.paths.output_dir)
        (out / "labels.jsonl").unlink()
        manifest = run_pipeline(config, resume=True)
        status = {s["name"]: s["status"] for s in manifest["stages"]}
        assert status["preprocess"] == "cached"
        assert status["parse"] == "cached"
        assert status["seed_label"] == "cached"
        assert status["expand_verbs"] == "cached"
        assert status["bootstrap"] == "done"
        assert status["train_abuse"] == "cached"
        assert status["score"] == "cached"

    def test_missing_embeddings_fails_at_expand_verbs(self, tmp_path):
        config_path = build_toy_project(tmp_path, out_name="out_fail")
        config = load_config(str(config_path))
        config.paths.embeddings = str(tmp_path / "missing_vectors.txt")
        with pytest.raises(PipelineError) as err:
            run_pipeline(config, resume=False)
        assert err.value.stage == "expand_verbs"
        out = Path(config.paths.output_dir)
        assert (out / "segments.jsonl").exists()
        assert (out / "parses.jsonl").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        failed = [s for s in manifest["stages"] if s["status"] == "failed"]
        assert [s["name"] for s in failed] == ["expand_verbs"]


class TestCli:
    def test_preprocess_verb(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text(json.dumps(
            {"doc_id": "d", "source": "other", "text": "We will win. They know it"}) + "\n")
        rc = cli_main([
            "preprocess", "--in", str(corpus),
            "--out", str(tmp_path / "segments.jsonl"),
            "--report", str(tmp_path / "report.json"),
            "--docs", str(tmp_path / "docs.jsonl"),
        ])
        assert rc == 0
        assert (tmp_path / "segments.jsonl").exists()
        out = capsys.readouterr().out
        assert "2 segments" in out

    def test_run_all_verb(self, tmp_path):
        config_path = build_toy_project(tmp_path, out_name="cli_out")
        rc = cli_main(["run-all", "--config", str(config_path)])
        assert rc == 0
        assert (tmp_path / "cli_out" / "manifest.json").exists()

    def test_run_all_reports_failure(self, tmp_path, capsys):
        config_path = build_toy_project(tmp_path, out_name="cli_fail")
        config = json.loads(config_path.read_text())
        config["paths"]["embeddings"] = str(tmp_path / "nope.txt")
        config_path.write_text(json.dumps(config))
        rc = cli_main(["run-all", "--config", str(config_path)])
        assert rc == 1
        assert "expand_verbs" in capsys.readouterr().err
