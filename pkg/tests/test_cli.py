import json

import numpy as np
import pytest

from softdebias.bias_space import default_spec
from softdebias.cli import main
from softdebias.embeddings import EmbeddingSet, load_word2vec_text, save_word2vec_text, unit_rows
from softdebias.manifest import verify_manifest
from softdebias.optim import make_rng
from softdebias.synthetic import write_fixture


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    return write_fixture(d, seed=0)


def _spec_words(spec):
    words = [w for g in spec.groups.values() for w in g]
    words += [w for a in spec.attribute_sets.values() for w in a]
    return list(dict.fromkeys(words + list(spec.targets)))


def test_zero_epochs_writes_normalized_input(tmp_path, fixture_dir):
    out = tmp_path / "out.txt"
    code = main(["debias", "--embeddings", str(fixture_dir["embeddings"]), "--bias-spec", str(fixture_dir["bias_spec"]),
                 "--out", str(out), "--method", "dsd", "--epochs", "0"])
    assert code == 0
    src = load_word2vec_text(fixture_dir["embeddings"])
    got = load_word2vec_text(out)
    assert got.vocab == src.vocab
    np.testing.assert_allclose(got.matrix, unit_rows(src.matrix), atol=1e-8)
    assert (tmp_path / "out.ckpt.npz").exists()
    manifest = tmp_path / "out.manifest.json"
    assert verify_manifest(manifest) == []


def test_inputs_are_not_mutated(tmp_path, fixture_dir):
    before = fixture_dir["embeddings"].read_bytes()
    assert main(["debias", "--embeddings", str(fixture_dir["embeddings"]), "--bias-spec", "gender",
                 "--out", str(tmp_path / "o.txt"), "--method", "baseline", "--epochs", "2"]) == 0
    assert fixture_dir["embeddings"].read_bytes() == before


def test_missing_required_flag_is_usage_error(tmp_path):
    assert main(["debias", "--bias-spec", "gender", "--out", str(tmp_path / "o.txt"), "--method", "dsd"]) == 2
    assert main(["debias", "--embeddings", "e", "--bias-spec", "gender", "--out", "o", "--method", "dsd", "--lambda", "2"]) == 2
    assert main(["debias", "--embeddings", "e", "--bias-spec", "gender", "--out", "o", "--method", "dsd", "--holdout", "1.5"]) == 2


def test_data_errors(tmp_path, fixture_dir):
    assert main(["debias", "--embeddings", str(tmp_path / "missing.txt"), "--bias-spec", "gender",
                 "--out", str(tmp_path / "o.txt"), "--method", "dsd"]) == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("2 3\nhe 1 2\n")
    assert main(["debias", "--embeddings", str(bad), "--bias-spec", "gender", "--out", str(tmp_path / "o.txt"), "--method", "dsd"]) == 3
    assert main(["debias", "--embeddings", str(fixture_dir["embeddings"]), "--bias-spec", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o.txt"), "--method", "dsd"]) == 3


def test_divergence_exit_code(tmp_path, fixture_dir):
    code = main(["debias", "--embeddings", str(fixture_dir["embeddings"]), "--bias-spec", "gender",
                 "--out", str(tmp_path / "o.txt"), "--method", "baseline", "--lr", "1e300", "--epochs", "50", "--lambda", "0.5"])
    assert code == 4


def test_schedule_recorded_for_768(tmp_path):
    spec = default_spec("gender")
    words = _spec_words(spec) + [f"bg{i}" for i in range(40)]
    emb = EmbeddingSet(tuple(words), make_rng(0).normal(size=(len(words), 768)))
    src = tmp_path / "e768.txt"
    save_word2vec_text(emb, src)
    out = tmp_path / "d768.txt"
    assert main(["debias", "--embeddings", str(src), "--bias-spec", "gender", "--out", str(out), "--method", "dsd"]) == 0
    train = json.loads((tmp_path / "d768.manifest.json").read_text())["config"]["train"]
    assert (train["blocks"], train["lr"], train["batch_size"], train["epochs"]) == (1, 5e-5, 2048, 100)


def test_eval_same_file_twice(tmp_path, fixture_dir, capsys):
    e = str(fixture_dir["embeddings"])
    report = tmp_path / "r.json"
    code = main(["eval", "--embeddings", e, e, "--bias-spec", "gender", "--metrics", "mac", "ss", "crows", "downstream",
                 "--stereoset", str(fixture_dir["stereoset"]), "--crows", str(fixture_dir["crows"]),
                 "--corpus", str(fixture_dir["corpus"]), "--report", str(report)])
    assert code == 0
    rep = json.loads(report.read_text())
    assert rep["format"] == "softdebias.report/1"
    for metric in ("mac", "ss", "crows", "downstream"):
        assert rep["metrics"][metric]["delta"] == 0.0
    assert rep["metrics"]["mac"]["p_value"] == 1.0
    assert "mac" in capsys.readouterr().out
    assert (tmp_path / "r.table.txt").exists() and verify_manifest(tmp_path / "r.manifest.json") == []


def test_eval_orthogonal_world_has_mac_one(tmp_path):
    spec = default_spec("gender")
    words = _spec_words(spec)
    d = len(words)
    emb = EmbeddingSet(tuple(words), np.eye(d))
    path = tmp_path / "ortho.txt"
    save_word2vec_text(emb, path)
    report = tmp_path / "r.json"
    assert main(["eval", "--embeddings", str(path), "--bias-spec", "gender", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["metrics"]["mac"]["biased"]["mac"] == 1.0


def test_eval_metric_needs_its_dataset(fixture_dir):
    e = str(fixture_dir["embeddings"])
    assert main(["eval", "--embeddings", e, "--bias-spec", "gender", "--metrics", "ss"]) == 2


def test_ablate(tmp_path, fixture_dir, capsys):
    out = tmp_path / "abl"
    args = ["ablate", "--embeddings", str(fixture_dir["embeddings"]), "--bias-spec", "gender", "--out", str(out),
            "--epochs", "2", "--seed", "5"]
    assert main(args) == 0
    text = capsys.readouterr().out
    assert "seed 5" in text
    table = json.loads((out / "ablation.json").read_text())
    assert set(table["mac"]) == {"biased", "baseline-sgd", "baseline-adam", "dsd-sgd", "dsd-adam"}
    seeds = {json.loads(p.read_text())["seed"] for p in out.glob("*.manifest.json")}
    assert seeds == {5} and len(list(out.glob("*.manifest.json"))) == 4
    assert main(args) == 2
    assert main(args + ["--force"]) == 0


@pytest.mark.parametrize("name", ["gender", "race", "religion"])
def test_shipped_spec_names(tmp_path, name):
    spec = default_spec(name)
    words = _spec_words(spec) + [f"bg{i}" for i in range(20)]
    emb = EmbeddingSet(tuple(words), make_rng(1).normal(size=(len(words), 8)))
    path = tmp_path / "e.txt"
    save_word2vec_text(emb, path)
    assert main(["debias", "--embeddings", str(path), "--bias-spec", name, "--out", str(tmp_path / "o.txt"),
                 "--method", "dsd", "--epochs", "1"]) == 0


def test_make_fixture(tmp_path, capsys):
    assert main(["make-fixture", "--out", str(tmp_path / "fx"), "--seed", "1"]) == 0
    assert (tmp_path / "fx" / "embeddings.txt").exists()
    assert "corpus" in capsys.readouterr().out


def test_threads_env(tmp_path, fixture_dir, monkeypatch):
    monkeypatch.setenv("SOFTDEBIAS_THREADS", "2")
    out = tmp_path / "o.txt"
    assert main(["debias", "--embeddings", str(fixture_dir["embeddings"]), "--bias-spec", "gender",
                 "--out", str(out), "--method", "dsd", "--epochs", "0"]) == 0
    assert json.loads((tmp_path / "o.manifest.json").read_text())["threads"] == 2
