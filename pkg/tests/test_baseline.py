import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softdebias.baseline import baseline_loss, factor, train_baseline
from softdebias.bias_space import BiasSpec, build_subspace, neutral_set, projection_energy
from softdebias.config import TrainConfig
from softdebias.embeddings import EmbeddingSet, unit_rows
from softdebias.errors import DivergenceError
from softdebias.optim import ParamTensor, grad_check, make_rng


def test_factor_examples():
    f = factor(np.eye(3))
    np.testing.assert_allclose(f.s, [1, 1, 1])
    w = np.outer([1.0, 2, 3], [1.0, -1])
    assert np.sum(factor(w).s > 1e-12) == 1
    x = make_rng(0).normal(size=(10, 4))
    f = factor(x)
    _, _, vt = np.linalg.svd(x.T, full_matrices=False)
    recon = f.u @ np.diag(f.s) @ vt
    assert np.linalg.norm(x.T - recon) / np.linalg.norm(x) <= 1e-10
    assert np.all(np.diff(f.s) <= 0)
    np.testing.assert_allclose(f.t1, np.diag(f.s) @ f.u.T)
    np.testing.assert_allclose(f.t2, f.u @ np.diag(f.s))


def test_factor_pads_when_vocab_smaller_than_dim():
    f = factor(make_rng(1).normal(size=(3, 6)))
    assert f.s.shape == (6,) and f.u.shape == (6, 6)
    assert np.all(f.s[3:] == 0)


def test_factor_rejects_non_finite():
    with pytest.raises(Exception):
        factor(np.array([[np.inf, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 8), st.integers(0, 10**6))
def test_identity_has_zero_norm1(v, d, seed):
    rng = make_rng(seed)
    f = factor(rng.normal(size=(v, d)))
    parts = baseline_loss(np.eye(d), f, rng.normal(size=(3, d)), rng.normal(size=(2, d)), 0.5)
    assert parts.norm1 == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 8), st.integers(0, 10**6))
def test_factored_norm1_matches_dense(v, d, seed):
    rng = make_rng(seed)
    x = rng.normal(size=(v, d))
    t = np.eye(d) + 0.4 * rng.normal(size=(d, d))
    dense = np.linalg.norm((x @ t.T) @ (x @ t.T).T - x @ x.T)
    got = baseline_loss(t, factor(x), np.ones((1, d)), np.ones((1, d)), 0.0).norm1
    assert abs(got - dense) <= 1e-8 * max(dense, 1e-300) + 1e-12


def test_norm2_zero_when_neutral_orthogonal():
    basis = np.array([[1.0, 0, 0]])
    neutral = np.array([[0.0, 1, 0], [0, 0, 1]])
    rot = np.array([[1.0, 0, 0], [0, 0, -1], [0, 1, 0]])  # keeps the plane orthogonal to e1
    assert baseline_loss(rot, factor(np.eye(3)), neutral, basis, 0.5).norm2 == 0.0


def test_lambda_out_of_range():
    with pytest.raises(ValueError):
        baseline_loss(np.eye(2), factor(np.eye(2)), np.ones((1, 2)), np.ones((1, 2)), 1.5)


@pytest.mark.parametrize("transform_bias", [False, True])
def test_gradient(transform_bias):
    rng = make_rng(2)
    x, neutral, basis = rng.normal(size=(12, 5)), rng.normal(size=(4, 5)), rng.normal(size=(2, 5))
    f = factor(x)
    t = ParamTensor("T", np.eye(5) + 0.2 * rng.normal(size=(5, 5)))
    _, g = baseline_loss(t.values, f, neutral, basis, 0.3, transform_bias, with_grad=True)
    t.grad[...] = g
    rep = grad_check(lambda: baseline_loss(t.values, f, neutral, basis, 0.3, transform_bias).total, [t], tol=1e-5)
    assert rep.passed, rep


def _world():
    vocab = ("he", "she", "doctor", "nurse") + tuple(f"n{i}" for i in range(8))
    rng = make_rng(9)
    m = rng.normal(size=(len(vocab), 2))
    m[:, 0] += 0.8  # neutral words lean along the he-she axis
    m[0], m[1] = [1.0, 0.2], [-1.0, 0.2]
    emb = EmbeddingSet(vocab, m)
    spec = BiasSpec("gender", {"m": ["he"], "f": ["she"]}, {"a": ["doctor"], "b": ["nurse"]}, ("doctor",))
    return emb, spec


def test_no_op_training():
    emb, spec = _world()
    res = train_baseline(emb, build_subspace(emb, spec), neutral_set(emb, spec), TrainConfig(lam=0.0, lr=0.0, epochs=5))
    np.testing.assert_allclose(res.embeddings.matrix, unit_rows(emb.matrix), atol=1e-15)
    assert len(res.history) == 5


def test_projection_energy_decreases_2d():
    emb, spec = _world()
    sub, ns = build_subspace(emb, spec), neutral_set(emb, spec)
    res = train_baseline(emb, sub, ns, TrainConfig(lam=0.9, lr=0.05, epochs=50, optimizer="sgd"))
    before = projection_energy(unit_rows(emb.matrix)[ns.indices], sub)
    after = projection_energy(res.embeddings.matrix[ns.indices], sub)
    assert after < before
    assert np.allclose(np.linalg.norm(res.embeddings.matrix, axis=1), 1.0)


def test_deterministic():
    emb, spec = _world()
    sub, ns = build_subspace(emb, spec), neutral_set(emb, spec)
    cfg = TrainConfig(lam=0.5, lr=0.01, epochs=20)
    a = train_baseline(emb, sub, ns, cfg).embeddings.matrix
    b = train_baseline(emb, sub, ns, cfg).embeddings.matrix
    assert a.tobytes() == b.tobytes()


def test_defaults_from_schedule():
    emb, spec = _world()
    res = train_baseline(emb, build_subspace(emb, spec), neutral_set(emb, spec), TrainConfig(optimizer="sgd", epochs=1))
    assert res.config.lr == 5e-5 and res.config.epochs == 1


def test_divergence_reports_last_good():
    emb, spec = _world()
    sub, ns = build_subspace(emb, spec), neutral_set(emb, spec)
    with pytest.raises(DivergenceError) as info:
        train_baseline(emb, sub, ns, TrainConfig(lam=0.5, lr=1e300, epochs=50, optimizer="sgd"))
    assert info.value.last_good is not None
    assert np.all(np.isfinite(info.value.last_good))
