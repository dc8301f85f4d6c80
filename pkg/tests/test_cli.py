import json
import shutil
from pathlib import Path

import pytest

from smer_impact.cli import main
from smer_impact.corpus import record_to_json
from smer_impact.synthetic import planted_corpus

DEMO = Path(__file__).resolve().parent.parent / "demo"
PIPELINE_FILES = ["documents.jsonl", "labeled.jsonl", "vectors.txt", "classifier.json", "test.jsonl", "lime.jsonl",
                  "words.csv", "summary.json", "summary.json.run.json"]


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    work = tmp_path_factory.mktemp("demo")
    shutil.copy(DEMO / "corpus.jsonl", work / "corpus.jsonl")
    shutil.copy(DEMO / "demo.toml", work / "demo.toml")
    assert main(["pipeline", "--config", str(work / "demo.toml")]) == 0
    return work


@pytest.fixture(scope="module")
def raw_corpus(tmp_path_factory):
    p = tmp_path_factory.mktemp("raw") / "corpus.jsonl"
    recs = planted_corpus(n_docs=240, n_novel_docs=8, seed=2).raw_records()
    p.write_text("".join(json.dumps(record_to_json(r)) + "\n" for r in recs))
    return p


class TestPipeline:
    def test_artifacts(self, demo_run):
        out = demo_run / "out"
        for name in PIPELINE_FILES:
            assert (out / name).exists(), name
        for method in ("smer", "random", "global_lime", "global_avg_lime"):
            assert (out / f"ranking_{method}.csv").exists()
            assert (out / f"aopc_{method}.csv").exists()

    def test_summary(self, demo_run):
        summary = json.loads((demo_run / "out" / "summary.json").read_text())
        assert summary["fidelity"]["violations"] == 0
        assert summary["auc"] > 0.8
        assert set(summary["aopc"]) == {"smer", "random", "global_lime", "global_avg_lime"}

    def test_run_record(self, demo_run):
        rec = json.loads((demo_run / "out" / "summary.json.run.json").read_text())
        assert rec["command"] == "pipeline"
        assert rec["config"]["seed"] == 0 and rec["config"]["dim"] == 50
        assert len(rec["inputs"]["../corpus.jsonl"]) == 64

    def test_byte_identical_rerun(self, demo_run, tmp_path):
        shutil.copy(demo_run / "corpus.jsonl", tmp_path / "corpus.jsonl")
        shutil.copy(demo_run / "demo.toml", tmp_path / "demo.toml")
        assert main(["pipeline", "--config", str(tmp_path / "demo.toml")]) == 0
        for name in PIPELINE_FILES:
            assert (tmp_path / "out" / name).read_bytes() == (demo_run / "out" / name).read_bytes(), name

    def test_flag_overrides_config(self, demo_run, tmp_path):
        rc = main(["pipeline", "--config", str(demo_run / "demo.toml"), "--out-dir", str(tmp_path / "o"),
                   "--dim", "8", "--epochs", "1"])
        assert rc == 0
        assert (tmp_path / "o" / "vectors.txt").read_text().splitlines()[0].split()[1] == "8"


class TestStepByStep:
    def test_chain(self, raw_corpus, tmp_path, capsys):
        t = tmp_path
        run = lambda *a: main([str(x) for x in a])  # noqa: E731
        assert run("preprocess", "--in", raw_corpus, "--out", t / "docs.jsonl", "--rejected", t / "rej.jsonl") == 0
        assert run("label", "--in", t / "docs.jsonl", "--out", t / "lab.jsonl",
                   "--pub-years", "2019:2020", "--cit-year", 2021) == 0
        assert run("train-embeddings", "--in", t / "docs.jsonl", "--out", t / "vec.txt", "--dim", 16,
                   "--epochs", 2) == 0
        assert run("train-clf", "--in", t / "lab.jsonl", "--embeddings", t / "vec.txt", "--out", t / "clf.json") == 0
        doi = json.loads((t / "docs.jsonl").read_text().splitlines()[0])["doi"]
        assert run("explain", "--model", t / "clf.json", "--embeddings", t / "vec.txt", "--docs", t / "docs.jsonl",
                   "--doc", doi, "--out", t / "explain.json") == 0
        report = json.loads((t / "explain.json").read_text())
        assert report["rows"]
        assert run("rank-words", "--model", t / "clf.json", "--embeddings", t / "vec.txt",
                   "--top", 5, "--bottom", 5, "--out", t / "words.csv") == 0
        assert run("cscore", "--model", t / "clf.json", "--embeddings", t / "vec.txt", "--docs", t / "docs.jsonl",
                   "--window", "2022:2022", "--new-after", 2021, "--out", t / "cs.csv") == 0
        assert "nv" in (t / "cs.csv").read_text()
        word = report["rows"][0]["word"]
        assert run("neighbors", "--model", t / "clf.json", "--embeddings", t / "vec.txt", "--seed", word,
                   "--threshold", 0.0, "--k", 3, "--out", t / "nb.csv") == 0
        assert run("lime", "--model", t / "clf.json", "--embeddings", t / "vec.txt", "--docs", t / "docs.jsonl",
                   "--doc", doi, "--n-samples", 50, "--out", t / "lime.jsonl") == 0
        assert run("global-importance", "--method", "global_lime", "--explanations", t / "lime.jsonl",
                   "--out", t / "gl.csv") == 0
        assert run("global-importance", "--method", "smer", "--model", t / "clf.json", "--embeddings",
                   t / "vec.txt", "--out", t / "smer.csv") == 0
        assert run("aopc", "--model", t / "clf.json", "--embeddings", t / "vec.txt", "--docs", t / "lab.jsonl",
                   "--ranking", t / "smer.csv", "--k", 3, "--out", t / "aopc.csv", "--summary", t / "aopc.json") == 0
        assert json.loads((t / "aopc.json").read_text())
        assert run("evaluate", "--in", t / "docs.jsonl", "--split", "random", "--train-years", "2019,2020",
                   "--train-cit-year", 2021, "--embeddings", t / "vec.txt", "--out", t / "eval.json") == 0
        assert 0.0 <= json.loads((t / "eval.json").read_text())["auc"] <= 1.0
        assert (t / "eval.json.run.json").exists()

    def test_bow_evaluate(self, raw_corpus, tmp_path):
        assert main(["preprocess", "--in", str(raw_corpus), "--out", str(tmp_path / "d.jsonl")]) == 0
        assert main(["evaluate", "--in", str(tmp_path / "d.jsonl"), "--features", "bow", "--train-years", "2019,2020",
                     "--train-cit-year", "2021", "--out", str(tmp_path / "e.json")]) == 0


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["preprocess", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_no_subcommand(self):
        assert main([]) == 1

    def test_missing_required(self, capsys):
        assert main(["label", "--in", "x.jsonl"]) == 1
        assert "--out" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "absent.jsonl"
        assert main(["preprocess", "--in", str(missing), "--out", str(tmp_path / "o.jsonl")]) == 2
        assert "absent.jsonl" in capsys.readouterr().err

    def test_bad_time_split(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(json.dumps({"doi": "a", "tokens": ["x"], "pub_year": 2020, "citations": {}}) + "\n")
        assert main(["evaluate", "--in", str(p), "--split", "time", "--train-years", "2020",
                     "--train-cit-year", "2021", "--test-years", "2020", "--test-cit-year", "2022"]) == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[preprocess]\nnot_an_option = 1\n")
        assert main(["preprocess", "--config", str(cfg)]) == 1

    def test_help(self, capsys):
        assert main(["--help"]) == 0
        assert "pipeline" in capsys.readouterr().out
