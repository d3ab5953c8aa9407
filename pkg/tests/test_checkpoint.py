import numpy as np
import pytest

from softdebias.baseline import train_baseline
from softdebias.bias_space import build_subspace, neutral_set
from softdebias.checkpoint import load_checkpoint, restore_net, save_checkpoint
from softdebias.config import TrainConfig
from softdebias.dsd import forward, train_dsd
from softdebias.errors import DataError
from softdebias.synthetic import make_fixture


@pytest.fixture(scope="module")
def world():
    fx = make_fixture(1, vocab_size=100, dim=12)
    return fx.embeddings, build_subspace(fx.embeddings, fx.spec), neutral_set(fx.embeddings, fx.spec)


def test_dsd_roundtrip(tmp_path, world):
    emb, sub, ns = world
    res = train_dsd(emb, sub, ns, TrainConfig(epochs=3, lr=1e-3, batch_size=32, blocks=2, seed=4))
    path = tmp_path / "m.ckpt.npz"
    save_checkpoint(path, "dsd", res)
    ckpt = load_checkpoint(path)
    assert ckpt["header"]["method"] == "dsd" and ckpt["header"]["blocks"] == 2
    assert ckpt["config"] == res.config
    assert ckpt["optimizer"].step_count == res.optimizer.step_count
    assert ckpt["history"].shape == (3, 3)
    net = restore_net(ckpt)
    np.testing.assert_array_equal(forward(net, emb.matrix), forward(res.model, emb.matrix))


def test_baseline_roundtrip(tmp_path, world):
    emb, sub, ns = world
    res = train_baseline(emb, sub, ns, TrainConfig(epochs=4, lr=1e-2, optimizer="sgd"))
    path = tmp_path / "b.npz"
    save_checkpoint(path, "baseline", res)
    ckpt = load_checkpoint(path)
    np.testing.assert_array_equal(ckpt["params"]["T"], res.model)
    with pytest.raises(DataError):
        restore_net(ckpt)


def test_saves_are_byte_identical(tmp_path, world):
    emb, sub, ns = world
    cfg = TrainConfig(epochs=2, lr=1e-3, batch_size=32, seed=9)
    a, b = tmp_path / "a.npz", tmp_path / "b.npz"
    save_checkpoint(a, "dsd", train_dsd(emb, sub, ns, cfg))
    save_checkpoint(b, "dsd", train_dsd(emb, sub, ns, cfg))
    assert a.read_bytes() == b.read_bytes()


def test_bad_files(tmp_path):
    junk = tmp_path / "junk.npz"
    junk.write_bytes(b"not a zip")
    with pytest.raises(DataError):
        load_checkpoint(junk)
    other = tmp_path / "other.npz"
    np.savez(other, x=np.zeros(2))
    with pytest.raises(DataError):
        load_checkpoint(other)


def test_unknown_method(tmp_path, world):
    emb, sub, ns = world
    res = train_baseline(emb, sub, ns, TrainConfig(epochs=1, optimizer="sgd"))
    with pytest.raises(ValueError):
        save_checkpoint(tmp_path / "x.npz", "other", res)
