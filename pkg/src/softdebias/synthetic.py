"""A small synthetic gender-bias world used by the tests and the
``make-fixture`` command.

Words are random unit vectors plus a component along a known unit axis ``b``.
The he/she and man/woman anchors are ``unit(c +/- b)`` with ``c`` orthogonal
to ``b``, so the bias subspace built from them is exactly ``+/- b``. Target
words carry ``+0.6 b``. Male attributes carry ``+0.9 b`` and female
attributes ``+0.3 b``: both groups share the targets' offset and differ from
each other by ``+/-0.3 b``. Background words have no injected component.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bias_space import BiasSpec, default_spec, save_bias_spec
from .datasets import CrowsPair, LabeledCorpus, StereoExample, save_corpus, save_crows, save_stereoset
from .embeddings import EmbeddingSet, save_word2vec_text
from .optim import make_rng

TARGET_OFFSET = 0.6
GROUP_SPLIT = 0.3


@dataclass(frozen=True)
class Fixture:
    embeddings: EmbeddingSet
    spec: BiasSpec
    axis: np.ndarray
    background: tuple


def _perp(rng, n, d, b):
    g = rng.standard_normal((n, d))
    g -= np.outer(g @ b, b)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def make_fixture(seed: int = 0, vocab_size: int = 400, dim: int = 64) -> Fixture:
    spec = default_spec("gender")
    male, female = spec.attribute_sets.values()
    n_special = 4 + len(spec.targets) + len(male) + len(female)
    if vocab_size <= n_special:
        raise ValueError(f"vocab_size must exceed {n_special}")
    rng = make_rng(seed)
    b = rng.standard_normal(dim)
    b /= np.linalg.norm(b)

    rows, vocab = [], []
    (he, man), (she, woman) = spec.groups.values()
    for left, right in ((he, she), (man, woman)):
        c = _perp(rng, 1, dim, b)[0]
        rows += [c + b, c - b]
        vocab += [left, right]
    rows.extend(_perp(rng, len(spec.targets), dim, b) + TARGET_OFFSET * b)
    vocab += list(spec.targets)
    rows.extend(_perp(rng, len(male), dim, b) + (TARGET_OFFSET + GROUP_SPLIT) * b)
    vocab += list(male)
    rows.extend(_perp(rng, len(female), dim, b) + (TARGET_OFFSET - GROUP_SPLIT) * b)
    vocab += list(female)
    n_bg = vocab_size - n_special
    rows.extend(rng.standard_normal((n_bg, dim)))
    background = tuple(f"w{i:04d}" for i in range(n_bg))
    vocab += background

    x = np.array(rows)
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return Fixture(EmbeddingSet(tuple(vocab), x, f"synthetic-gender-{seed}"), spec, b, background)


def stereo_examples(fx: Fixture) -> list:
    male, female = fx.spec.attribute_sets.values()
    targets = fx.spec.targets
    out = []
    for i, t in enumerate(targets):
        # targets alternate male/female in the shipped list
        own, other = (male, female) if i % 2 == 0 else (female, male)
        out.append(StereoExample(f"The {t} works as a", f"{own[i % len(own)]}.", f"{other[i % len(other)]}.", "gender"))
    return out


def crows_pairs(fx: Fixture) -> list:
    male, female = fx.spec.attribute_sets.values()
    out = []
    for a in male:
        out.append(CrowsPair(f"The man was a {a}.", f"The woman was a {a}.", "stereo", "gender"))
    for i, a in enumerate(female):
        label = "stereo" if i % 2 == 0 else "antistereo"
        if label == "stereo":
            out.append(CrowsPair(f"She is a {a}.", f"He is a {a}.", label, "gender"))
        else:
            out.append(CrowsPair(f"He is a {a}.", f"She is a {a}.", label, "gender"))
    return out


def separable_corpus(fx: Fixture, n_per_class: int = 60, pool: int = 30, seed: int = 0) -> LabeledCorpus:
    """Sentences over background words split by a random direction orthogonal
    to the bias axis: class 1 draws from the words most aligned with it."""
    rng = make_rng(seed)
    emb = fx.embeddings
    bg = list(fx.background)
    r = _perp(rng, 1, emb.dim, fx.axis)[0]
    order = np.argsort(emb.rows(bg) @ r, kind="stable")
    neg = [bg[i] for i in order[:pool]]
    pos = [bg[i] for i in order[-pool:]]
    mid = [bg[i] for i in order[pool:-pool]]
    records = []
    for label, words in ((0, neg), (1, pos)):
        for _ in range(n_per_class):
            picks = [words[j] for j in rng.choice(len(words), 4, replace=False)]
            picks += [mid[j] for j in rng.choice(len(mid), 2, replace=False)]
            records.append((" ".join(picks), label))
    order = rng.permutation(len(records))
    return LabeledCorpus(tuple(records[i] for i in order), "synthetic-separable")


def write_fixture(out_dir, seed: int = 0) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fx = make_fixture(seed)
    paths = {
        "embeddings": out / "embeddings.txt",
        "bias_spec": out / "gender_spec.json",
        "stereoset": out / "stereoset.jsonl",
        "crows": out / "crows.csv",
        "corpus": out / "corpus.tsv",
    }
    save_word2vec_text(fx.embeddings, paths["embeddings"])
    save_bias_spec(fx.spec, paths["bias_spec"])
    save_stereoset(stereo_examples(fx), paths["stereoset"])
    save_crows(crows_pairs(fx), paths["crows"])
    save_corpus(separable_corpus(fx), paths["corpus"])
    return paths
