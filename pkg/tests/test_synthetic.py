import numpy as np

from softdebias.bias_space import build_subspace, neutral_set
from softdebias.datasets import load_corpus, load_crows, load_stereoset
from softdebias.embeddings import load_word2vec_text
from softdebias.metrics import mac
from softdebias.synthetic import make_fixture, write_fixture


def test_subspace_is_the_axis():
    fx = make_fixture(3)
    sub = build_subspace(fx.embeddings, fx.spec)
    for row in sub.basis:
        assert abs(abs(row @ fx.axis) - 1.0) <= 1e-10


def test_fixture_is_biased_and_deterministic():
    a, b = make_fixture(5), make_fixture(5)
    assert a.embeddings.matrix.tobytes() == b.embeddings.matrix.tobytes()
    assert mac(a.embeddings, a.spec.targets, a.spec.attribute_sets).mac < 0.85
    assert np.allclose(np.linalg.norm(a.embeddings.matrix, axis=1), 1.0)
    assert len(a.embeddings) == 400 and a.embeddings.dim == 64


def test_neutral_set_is_background():
    fx = make_fixture(0)
    ns = neutral_set(fx.embeddings, fx.spec)
    assert {fx.embeddings.vocab[i] for i in ns.indices} == set(fx.background)


def test_write_fixture_files_load(tmp_path):
    paths = write_fixture(tmp_path, seed=2)
    emb = load_word2vec_text(paths["embeddings"])
    assert len(emb) == 400
    corpus = load_corpus(paths["corpus"])
    labels = [y for _, y in corpus.records]
    assert labels.count(0) == labels.count(1) == 60
    assert all(t in emb for text, _ in corpus.records for t in text.split())
    assert load_stereoset(paths["stereoset"]) and load_crows(paths["crows"])
