from __future__ import annotations

import json
import os

import pytest

from solid import taxonomy
from solid.cli import Settings, main, parse_config_file
from solid.ipeval import validate_metrics_report
from solid.jsonl import read_jsonl
from solid.seeder import read_seeds

from helpers import make_dialog


def _write_dialogs(path, dialogs):
    taxonomy.write_dialogs(path, dialogs)
    return str(path)


@pytest.fixture
def small_corpus(tmp_path):
    dialogs = [
        make_dialog(f"d{i}", [["OQ"], ["PA"], ["PF"]],
                    texts=[f"Question {i} here.", f"Answer {i} text.", "Thanks a lot."])
        for i in range(6)
    ]
    return _write_dialogs(tmp_path / "dialogs.jsonl", dialogs)


class TestDispatch:
    def test_unknown_subcommand_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_args_exits_1(self):
        assert main([]) == 1

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "usage" in capsys.readouterr().out.lower()

    def test_missing_input_file_exits_2(self, tmp_path):
        assert main(["stats", "--in", str(tmp_path / "nope.jsonl")]) == 2

    def test_stats_prints_json(self, small_corpus, capsys):
        assert main(["stats", "--in", small_corpus]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["n_dialogs"] == 6
        assert out["avg_turns"] == 3.0


class TestSeedCommand:
    def test_writes_seeds_and_manifest(self, tmp_path):
        out = tmp_path / "seeds.jsonl"
        assert main(["seed", "--budget", "5", "--rng-seed", "1", "--out", str(out)]) == 0
        assert len(read_seeds(out)) == 5
        manifest = json.loads((tmp_path / "seeds.jsonl.manifest.json").read_text())
        assert manifest["command"] == "seed"
        assert manifest["counts"]["generated"] == 5
        assert manifest["backend"] == "mock"
        assert str(out) in manifest["outputs"]

    def test_msdialog_corpus_format(self, tmp_path):
        corpus = tmp_path / "ms.json"
        corpus.write_text(json.dumps({
            "1": {"utterances": [{"tags": "OQ"}, {"tags": "PA PF"}]},
            "2": {"utterances": [{"tags": "OQ GG"}, {"tags": "IR"}, {"tags": "FD"}]},
        }), encoding="utf-8")
        out = tmp_path / "seeds.jsonl"
        assert main(["seed", "--corpus", str(corpus), "--format", "msdialog",
                     "--budget", "4", "--rng-seed", "1", "--out", str(out)]) == 0
        seeds = read_seeds(out)
        assert len(seeds) == 4
        assert all(len(s.intent_sequence) in (2, 3) for s in seeds)


class TestGenerateCommand:
    def _seeds(self, tmp_path, budget=4):
        seeds = tmp_path / "seeds.jsonl"
        main(["seed", "--budget", str(budget), "--rng-seed", "2", "--out", str(seeds)])
        return str(seeds)

    def test_turnwise(self, tmp_path):
        seeds = self._seeds(tmp_path)
        out = tmp_path / "dialogs.jsonl"
        assert main(["generate", "--seeds", seeds, "--out", str(out)]) == 0
        dialogs = taxonomy.read_dialogs(out)
        assert len(dialogs) == 4
        for d, seed in zip(dialogs, read_seeds(seeds)):
            assert len(d.utterances) == len(seed.intent_sequence)

    def test_singlepass(self, tmp_path):
        seeds = self._seeds(tmp_path)
        out = tmp_path / "rejected.jsonl"
        assert main(["generate", "--seeds", seeds, "--out", str(out),
                     "--mode", "singlepass"]) == 0
        assert len(taxonomy.read_dialogs(out)) == 4

    def test_instruction_cache_sidecar(self, tmp_path):
        seeds = self._seeds(tmp_path, budget=6)
        out = tmp_path / "dialogs.jsonl"
        cache = tmp_path / "cache.jsonl"
        assert main(["generate", "--seeds", seeds, "--out", str(out),
                     "--instruction-cache", str(cache)]) == 0
        if cache.exists():
            for row in read_jsonl(cache):
                assert set(row) == {"actor", "intents", "instruction"}


class TestBuildDpo:
    def test_pairs_written(self, tmp_path):
        seeds = tmp_path / "seeds.jsonl"
        chosen = tmp_path / "chosen.jsonl"
        rejected = tmp_path / "rejected.jsonl"
        pairs = tmp_path / "pairs.jsonl"
        main(["seed", "--budget", "4", "--rng-seed", "3", "--out", str(seeds)])
        main(["generate", "--seeds", str(seeds), "--out", str(chosen)])
        main(["generate", "--seeds", str(seeds), "--out", str(rejected), "--mode", "singlepass"])
        assert main(["build-dpo", "--chosen", str(chosen), "--rejected", str(rejected),
                     "--seeds", str(seeds), "--out", str(pairs)]) == 0
        rows = list(read_jsonl(pairs))
        assert rows
        for row in rows:
            assert set(row) == {"prompt", "chosen", "rejected", "meta"}
            assert "quality dialog:" in row["prompt"]

    def test_no_lmq_drops_prefix(self, tmp_path):
        seeds = tmp_path / "seeds.jsonl"
        chosen = tmp_path / "chosen.jsonl"
        rejected = tmp_path / "rejected.jsonl"
        pairs = tmp_path / "pairs.jsonl"
        main(["seed", "--budget", "3", "--rng-seed", "3", "--out", str(seeds)])
        main(["generate", "--seeds", str(seeds), "--out", str(chosen)])
        main(["generate", "--seeds", str(seeds), "--out", str(rejected), "--mode", "singlepass"])
        main(["build-dpo", "--chosen", str(chosen), "--rejected", str(rejected),
              "--seeds", str(seeds), "--out", str(pairs), "--no-lmq"])
        for row in read_jsonl(pairs):
            assert "quality dialog:" not in row["prompt"]


class TestSampleCommand:
    def _corpora(self, tmp_path):
        human = [make_dialog(f"h{i}", [["OQ"], ["PA"]],
                             texts=[f"Question {i}.", f"Answer {i}."]) for i in range(4)]
        synthetic = [make_dialog(f"s{i:02d}", [["OQ"], ["PA"]],
                                 texts=[f"Synthetic question {i}.", f"Synthetic answer {i}."])
                     for i in range(12)]
        return (_write_dialogs(tmp_path / "human.jsonl", human),
                _write_dialogs(tmp_path / "synthetic.jsonl", synthetic))

    @pytest.mark.parametrize("strategy", ["bm25", "embed", "seqint-bal", "int-bal", "random-eq"])
    def test_each_strategy_runs(self, tmp_path, strategy):
        human, synthetic = self._corpora(tmp_path)
        out = tmp_path / f"{strategy}.jsonl"
        code = main(["sample", "--strategy", strategy, "--human", human,
                     "--synthetic", synthetic, "--out", str(out),
                     "--k", "2", "--min-count", "5", "--rng-seed", "1"])
        assert code == 0
        taxonomy.read_dialogs(out)
        manifest = json.loads((tmp_path / f"{strategy}.jsonl.manifest.json").read_text())
        assert manifest["config"]["strategy"] == strategy

    def test_random_eq_matches_human_size(self, tmp_path):
        human, synthetic = self._corpora(tmp_path)
        out = tmp_path / "eq.jsonl"
        main(["sample", "--strategy", "random-eq", "--human", human,
              "--synthetic", synthetic, "--out", str(out)])
        assert len(taxonomy.read_dialogs(out)) == 4


class TestTrainEval:
    def test_round_trip_report_validates(self, tmp_path):
        out_dir = tmp_path / "run"
        assert main(["pipeline", "--budget", "20", "--rng-seed", "4",
                     "--out-dir", str(out_dir)]) == 0
        model = tmp_path / "model.json"
        report = tmp_path / "report.json"
        dialogs = str(out_dir / "dialogs.jsonl")
        assert main(["train-ip", "--train", dialogs, "--model-out", str(model)]) == 0
        assert main(["eval-ip", "--model", str(model), "--test", dialogs,
                     "--report", str(report)]) == 0
        obj = json.loads(report.read_text())
        validate_metrics_report(obj)
        assert obj["f1_micro"] > 0.9  # training set, marker corpus


class TestFilterEntities:
    def test_fixture_partition(self, tmp_path):
        seeds = tmp_path / "seeds.jsonl"
        main(["seed", "--budget", "6", "--rng-seed", "5", "--out", str(seeds)])
        names = [s.entity_name for s in read_seeds(seeds)]
        fixture = tmp_path / "wiki.json"
        fixture.write_text(json.dumps({names[0]: True}), encoding="utf-8")
        out = tmp_path / "marked.jsonl"
        assert main(["filter-entities", "--seeds", str(seeds), "--mode", "fixture",
                     "--fixture", str(fixture), "--partition", "--out", str(out)]) == 0
        marked = read_seeds(out)
        assert all(s.hallucinated is not None for s in marked)
        yes = read_seeds(tmp_path / "marked.hallucinated.jsonl")
        no = read_seeds(tmp_path / "marked.non_hallucinated.jsonl")
        assert len(yes) + len(no) == len(marked)
        assert any(s.entity_name == names[0] for s in no)


class TestConfigPrecedence:
    def test_file_parsed(self, tmp_path):
        cfg = tmp_path / "solid.cfg"
        cfg.write_text('model = "my-model"\ntemperature = 0.2  # low\n', encoding="utf-8")
        values = parse_config_file(str(cfg))
        assert values == {"model": "my-model", "temperature": "0.2"}

    def test_flag_beats_file_beats_default(self, tmp_path):
        import argparse

        cfg = {"temperature": "0.2"}
        flags = argparse.Namespace(temperature=0.9)
        assert Settings(flags, cfg).get("temperature", float) == 0.9
        flags = argparse.Namespace(temperature=None)
        assert Settings(flags, cfg).get("temperature", float) == 0.2
        assert Settings(argparse.Namespace(), {}).get("temperature", float) == 0.7

    def test_malformed_config_is_usage_error(self, tmp_path, small_corpus):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not a key value line\n", encoding="utf-8")
        seeds = tmp_path / "seeds.jsonl"
        assert main(["seed", "--budget", "1", "--out", str(seeds),
                     "--config", str(cfg)]) == 1


class TestPipelineDeterminism:
    def test_byte_identical_outputs(self, tmp_path):
        run_a = tmp_path / "a"
        run_b = tmp_path / "b"
        for out_dir in (run_a, run_b):
            assert main(["pipeline", "--backend", "mock", "--budget", "8",
                         "--rng-seed", "1", "--out-dir", str(out_dir)]) == 0
        data_files = ["seeds.jsonl", "dialogs.jsonl", "rejected.jsonl",
                      "pairs.jsonl", "subset.jsonl"]
        for name in data_files:
            assert (run_a / name).read_bytes() == (run_b / name).read_bytes(), name
        manifest = json.loads((run_a / "manifest.json").read_text())
        assert manifest["counts"]["seeds"] == 8
