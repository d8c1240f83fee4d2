import json
from pathlib import Path

import pytest

from factqa.cli import main
from factqa.manifest import sha256_file


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


GEN_ARGS = ["gen", "--entities", "12", "--relations", "4",
            "--facts-per-entity", "3", "--queries-per-entity", "4",
            "--vocab", "12", "--seed", "5"]


@pytest.fixture(scope="module")
def corpus_dir(workdir):
    out = workdir / "corpus"
    assert main(GEN_ARGS + ["--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def model_dir(workdir, corpus_dir):
    out = workdir / "model"
    code = main(["train", "--db", str(corpus_dir / "facts.jsonl"),
                 "--out", str(out), "--dim", "8", "--epochs", "12",
                 "--seed", "3"])
    assert code == 0
    return out


def test_gen_writes_corpus_and_manifest(corpus_dir):
    assert (corpus_dir / "facts.jsonl").exists()
    assert (corpus_dir / "provenance.jsonl").exists()
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    assert manifest["subcommand"] == "gen"
    assert set(manifest["outputs"]) == {"facts.jsonl", "provenance.jsonl"}


def test_gen_deterministic(workdir):
    out2 = workdir / "corpus2"
    assert main(GEN_ARGS + ["--out", str(out2)]) == 0
    for name in ("facts.jsonl", "provenance.jsonl"):
        assert sha256_file(out2 / name) == sha256_file(workdir / "corpus" / name)


def test_train_outputs(model_dir):
    assert (model_dir / "model.ckpt").exists()
    assert (model_dir / "history.csv").exists()
    assert (model_dir / "training_curve.png").exists()
    manifest = json.loads((model_dir / "manifest.json").read_text())
    assert "model.ckpt" in manifest["outputs"]


def test_answer_prints_prediction(corpus_dir, model_dir, capsys):
    code = main(["answer", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model", str(model_dir / "model.ckpt"),
                 "--query-id", "q:00000"])
    assert code == 0
    obj = json.loads(capsys.readouterr().out.strip())
    assert obj["query_id"] == "q:00000"
    assert "prediction" in obj and "correct" in obj


def test_answer_unknown_query_is_domain_error(corpus_dir, model_dir, capsys):
    code = main(["answer", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model", str(model_dir / "model.ckpt"),
                 "--query-id", "q:99999"])
    assert code == 1


def test_explain_writes_dump(corpus_dir, model_dir, workdir):
    out = workdir / "explain.jsonl"
    code = main(["explain", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model", str(model_dir / "model.ckpt"),
                 "--query-id", "q:00001", "--methods", "ip,aw1,lime,random",
                 "--lime-samples", "64", "--seed", "2", "--out", str(out)])
    assert code == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert [r["method"] for r in rows] == ["ip", "aw1", "lime", "random"]
    for row in rows:
        assert row["query_id"] == "q:00001"
        assert {"fact_id", "score"} == set(row["scores"][0])
        assert "flags" in row


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_method_is_domain_error(corpus_dir, model_dir):
    code = main(["explain", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model", str(model_dir / "model.ckpt"),
                 "--query-id", "q:00001", "--methods", "shapley"])
    assert code == 1


def test_missing_file_is_domain_error(model_dir):
    code = main(["answer", "--db", "does/not/exist.jsonl",
                 "--model", str(model_dir / "model.ckpt"),
                 "--query-id", "q:00000"])
    assert code == 1


@pytest.fixture(scope="module")
def second_model(workdir, corpus_dir):
    out = workdir / "model_b"
    code = main(["train", "--db", str(corpus_dir / "facts.jsonl"),
                 "--out", str(out), "--dim", "8", "--epochs", "2",
                 "--seed", "3"])
    assert code == 0
    return out


def test_make_study_and_report(workdir, corpus_dir, model_dir, second_model):
    study = workdir / "study"
    code = main(["make-study", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model-a", str(model_dir / "model.ckpt"),
                 "--model-b", str(second_model / "model.ckpt"),
                 "--methods", "awavg,ip", "--k", "3",
                 "--lime-samples", "32", "--seed", "4",
                 "--out", str(study)])
    assert code == 0
    tasks = [json.loads(l) for l in (study / "tasks.jsonl").read_text().splitlines()]
    assert tasks and len(tasks) % 2 == 0

    votes_path = workdir / "votes.jsonl"
    votes_path.write_text(json.dumps({
        "task_id": tasks[0]["task_id"], "annotator": "a",
        "choice": "difficult", "timestamp": ""}) + "\n")
    report_dir = workdir / "report"
    code = main(["report", "--tasks", str(study / "tasks.jsonl"),
                 "--votes", str(votes_path), "--out", str(report_dir)])
    assert code == 0
    report = json.loads((report_dir / "report.json").read_text())
    assert report["total_votes"] == 1
    assert (report_dir / "votes.csv").exists()
    assert (report_dir / "vote_distribution.png").exists()


def test_make_study_requires_quality_gap(workdir, corpus_dir, model_dir):
    code = main(["make-study", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model-a", str(model_dir / "model.ckpt"),
                 "--model-b", str(model_dir / "model.ckpt"),
                 "--methods", "ip", "--seed", "4",
                 "--out", str(workdir / "study_same")])
    assert code == 1  # same checkpoint: no strict quality gap


def test_pointing_game_cli(workdir, corpus_dir, model_dir):
    out = workdir / "pg"
    code = main(["pointing-game", "--db", str(corpus_dir / "facts.jsonl"),
                 "--model", str(model_dir / "model.ckpt"),
                 "--methods", "ip,random", "--seed", "6",
                 "--max-instances", "12", "--lime-samples", "32",
                 "--out", str(out)])
    assert code == 0
    results = json.loads((out / "results.json").read_text())
    assert set(results["methods"]) == {"ip", "random"}
    assert results["instances"] > 0
    assert (out / "hits.jsonl").exists()
    assert (out / "accuracy.csv").exists()
    assert (out / "accuracy_by_method.png").exists()
    key = next(iter(results["p_values"]))
    assert {"p_value", "significant", "discordant"} <= set(results["p_values"][key])
