"""Downstream check: logistic regression on averaged sentence vectors, run on
biased and debiased embeddings with the same split, reporting the accuracy change."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledCorpus
from .embeddings import EmbeddingSet, TokenizerConfig, sentence_vector
from .errors import DataError
from .optim import make_rng

LR = 0.1
EPOCHS = 300
L2 = 1e-4
MIN_PER_CLASS = 10
TEST_FRACTION = 0.2


@dataclass(frozen=True)
class DeltaReport:
    acc_biased: float
    acc_debiased: float
    delta: float
    seed: int
    excluded: int


def features(emb: EmbeddingSet, corpus: LabeledCorpus, tokenizer=TokenizerConfig()):
    """Unit-normalized mean vectors; all-OOV (or zero) rows dropped."""
    xs, ys, kept = [], [], []
    for i, (text, label) in enumerate(corpus.records):
        sv = sentence_vector(emb, text, tokenizer)
        if sv is None:
            continue
        norm = np.linalg.norm(sv.vector)
        if norm == 0:
            continue
        xs.append(sv.vector / norm)
        ys.append(label)
        kept.append(i)
    if not xs:
        return np.empty((0, emb.dim)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.stack(xs), np.array(ys, dtype=np.int64), np.array(kept, dtype=np.int64)


def stratified_split(labels, seed: int, test_fraction: float = TEST_FRACTION):
    """Per-class shuffle; the first round(frac * n_c) of each class go to test."""
    labels = np.asarray(labels)
    rng = make_rng(seed)
    train, test = [], []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test.extend(idx[:n_test].tolist())
        train.extend(idx[n_test:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


def fit_logreg(x, y, lr=LR, epochs=EPOCHS, l2=L2):
    """Full-batch gradient descent on mean log-loss + (l2/2)||w||^2 from zero."""
    w = np.zeros(x.shape[1])
    b = 0.0
    n = len(y)
    for _ in range(epochs):
        z = x @ w + b
        p = 0.5 * (1.0 + np.tanh(0.5 * z))
        r = p - y
        w -= lr * (x.T @ r / n + l2 * w)
        b -= lr * float(r.mean())
    return w, b


def _check_classes(labels, what):
    counts = np.bincount(labels, minlength=2)
    if counts.min() == 0:
        raise DataError(f"a class is missing from the {what}")
    return counts


def _split_for(corpus, seed):
    # The split is drawn over corpus rows so two embedding sets with different
    # OOV coverage still share it.
    labels = np.array([y for _, y in corpus.records], dtype=np.int64)
    counts = np.bincount(labels, minlength=2)
    if counts.min() < MIN_PER_CLASS:
        raise DataError(f"need at least {MIN_PER_CLASS} records per class, got {counts.tolist()}")
    return stratified_split(labels, seed)


def train_eval(emb: EmbeddingSet, corpus: LabeledCorpus, split_seed: int = 0, tokenizer=TokenizerConfig()):
    """Test accuracy; returns (accuracy, excluded row count)."""
    train_rows, test_rows = _split_for(corpus, split_seed)
    x, y, kept = features(emb, corpus, tokenizer)
    pos = {r: i for i, r in enumerate(kept.tolist())}
    tr = np.array([pos[r] for r in train_rows.tolist() if r in pos], dtype=np.int64)
    te = np.array([pos[r] for r in test_rows.tolist() if r in pos], dtype=np.int64)
    _check_classes(y[tr], "training split")
    _check_classes(y[te], "test split")
    w, b = fit_logreg(x[tr], y[tr].astype(np.float64))
    pred = (x[te] @ w + b > 0).astype(np.int64)
    return float(np.mean(pred == y[te])), len(corpus.records) - len(kept)


def delta(biased: EmbeddingSet, debiased: EmbeddingSet, corpus: LabeledCorpus, seed: int = 0, tokenizer=TokenizerConfig()) -> DeltaReport:
    if biased.vocab != debiased.vocab:
        raise DataError("biased and debiased embeddings have different vocabularies")
    acc_b, excl = train_eval(biased, corpus, seed, tokenizer)
    acc_d, _ = train_eval(debiased, corpus, seed, tokenizer)
    return DeltaReport(acc_b, acc_d, acc_d - acc_b, seed, excl)
