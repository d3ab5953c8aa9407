import pytest
from hypothesis import given
from hypothesis import strategies as st

from softdebias.config import SCHEDULE, TrainConfig, default_hypers


@pytest.mark.parametrize(
    "d,expected",
    [
        (300, (1, 5e-5, 2048, 100)),
        (768, (1, 5e-5, 2048, 100)),
        (1024, (1, 5e-5, 2048, 100)),
        (1536, (1, 5e-5, 2048, 150)),
        (2048, (2, 5e-5, 1024, 200)),
        (3072, (2, 5e-5, 1024, 250)),
        (4096, (3, 1e-5, 1024, 300)),
    ],
)
def test_schedule_rows(d, expected):
    assert default_hypers(d) == expected


@given(st.integers(1, 10000), st.integers(1, 10000))
def test_blocks_and_epochs_monotone(a, b):
    lo, hi = sorted((a, b))
    assert default_hypers(lo)[0] <= default_hypers(hi)[0]
    assert default_hypers(lo)[3] <= default_hypers(hi)[3]


def test_schedule_ends_with_catch_all():
    assert SCHEDULE[-1][0] is None
    with pytest.raises(ValueError):
        default_hypers(0)


def test_resolve_keeps_explicit_values():
    cfg = TrainConfig(lr=1e-3, epochs=3).resolve(768)
    assert (cfg.lr, cfg.epochs, cfg.batch_size, cfg.blocks) == (1e-3, 3, 2048, 1)
    assert TrainConfig().resolve(4096).blocks == 3


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lam": -0.1},
        {"lam": 1.01},
        {"lr": -1.0},
        {"batch_size": 0},
        {"epochs": -1},
        {"blocks": 0},
        {"optimizer": "rmsprop"},
        {"loss": "cosine"},
        {"holdout": 1.0},
        {"neutral_sample": 0},
    ],
)
def test_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_digest_stable_and_sensitive():
    assert TrainConfig(seed=1).digest() == TrainConfig(seed=1).digest()
    assert TrainConfig(seed=1).digest() != TrainConfig(seed=2).digest()
    assert TrainConfig(**TrainConfig(lam=0.3).to_dict()) == TrainConfig(lam=0.3)
