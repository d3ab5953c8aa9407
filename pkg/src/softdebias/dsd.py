"""Residual-network debiasing.

A stack of residual blocks ``y = x + relu(x W1^T + b1) W2^T + b2`` is trained
with minibatches to keep each batch's Gram matrix unchanged while shrinking
the projection of neutral words onto the fixed bias subspace.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .baseline import TrainResult
from .bias_space import BiasSubspace, NeutralSet
from .config import TrainConfig
from .embeddings import EmbeddingSet, unit_rows
from .errors import DataError, DivergenceError
from .optim import OptimizerState, ParamTensor, make_rng, step

log = logging.getLogger(__name__)


class ResidualBlock:
    def __init__(self, dim: int, index: int, rng=None):
        bound = 1.0 / np.sqrt(dim)
        w1 = rng.uniform(-bound, bound, size=(dim, dim)) if rng is not None else np.zeros((dim, dim))
        self.W1 = ParamTensor(f"block{index}.W1", w1)
        self.b1 = ParamTensor(f"block{index}.b1", np.zeros(dim))
        self.W2 = ParamTensor(f"block{index}.W2", np.zeros((dim, dim)))
        self.b2 = ParamTensor(f"block{index}.b2", np.zeros(dim))

    @property
    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def forward(self, x):
        h = x @ self.W1.values.T + self.b1.values
        a = np.maximum(h, 0.0)
        y = x + a @ self.W2.values.T + self.b2.values
        return y, (x, h, a)

    def backward(self, dy, cache):
        """Accumulate parameter grads and return dL/dx."""
        x, h, a = cache
        self.W2.grad += dy.T @ a
        self.b2.grad += dy.sum(axis=0)
        dh = (dy @ self.W2.values) * (h > 0)
        self.W1.grad += dh.T @ x
        self.b1.grad += dh.sum(axis=0)
        return dy + dh @ self.W1.values


class DebiasNet:
    def __init__(self, dim: int, blocks: int, rng=None):
        if blocks < 1:
            raise ValueError("a network needs at least one residual block")
        self.dim = dim
        self.blocks = [ResidualBlock(dim, i, rng) for i in range(blocks)]

    @property
    def params(self):
        return [p for blk in self.blocks for p in blk.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def forward(self, x, keep=False):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"expected (b, {self.dim}) input, got {x.shape}")
        caches = []
        for blk in self.blocks:
            x, cache = blk.forward(x)
            caches.append(cache)
        return (x, caches) if keep else x

    def backward(self, dy, caches):
        for blk, cache in zip(reversed(self.blocks), reversed(caches)):
            dy = blk.backward(dy, cache)
        return dy

    def state_dict(self) -> dict:
        return {p.name: p.values.copy() for p in self.params}

    def load_state_dict(self, state: dict):
        for p in self.params:
            if p.name not in state:
                raise DataError(f"missing parameter {p.name}")
            arr = np.asarray(state[p.name], dtype=np.float64)
            if arr.shape != p.values.shape:
                raise DataError(f"{p.name}: shape {arr.shape} != {p.values.shape}")
            p.values[...] = arr


def forward(net: DebiasNet, x):
    return net.forward(x)


@dataclass(frozen=True)
class DsdLoss:
    total: float
    norm1: float
    norm2: float


def dsd_loss(net, batch, neutral_batch, basis, lam: float, loss: str = "gram", backward=False) -> DsdLoss:
    """Batch loss; with ``backward`` the parameter grads are accumulated in ``net``.

    gram:                norm1 = ||O O^T - X X^T||_F / b
    literal-orthonormal: norm1 = ||O^T O - I||_F
    both:                norm2 = ||O_n B^T||_F / sqrt(m k)
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    basis = basis.basis if isinstance(basis, BiasSubspace) else np.asarray(basis, dtype=np.float64)
    batch = np.asarray(batch, dtype=np.float64)
    neutral_batch = np.asarray(neutral_batch, dtype=np.float64)
    for name, arr in (("batch", batch), ("neutral batch", neutral_batch), ("bias basis", basis)):
        if arr.ndim != 2 or arr.shape[1] != net.dim:
            raise ValueError(f"{name} has shape {arr.shape}; expected {net.dim} columns")

    b = batch.shape[0]
    m, k = neutral_batch.shape[0], basis.shape[0]

    o, caches = net.forward(batch, keep=True)
    if loss == "gram":
        e = o @ o.T - batch @ batch.T
        n1 = float(np.linalg.norm(e)) / b if b else 0.0
    elif loss == "literal-orthonormal":
        e = o.T @ o - np.eye(net.dim)
        n1 = float(np.linalg.norm(e))
    else:
        raise ValueError(f"unknown loss {loss!r}")

    on, ncaches = net.forward(neutral_batch, keep=True)
    p = on @ basis.T
    scale = np.sqrt(m * k) if m else 1.0
    n2 = float(np.linalg.norm(p)) / scale
    total = (1.0 - lam) * n1 + lam * n2
    if not backward:
        return DsdLoss(total, n1, n2)

    if n1 > 0:
        if loss == "gram":
            do = (1.0 - lam) * 2.0 * (e @ o) / (n1 * b * b)
        else:
            do = (1.0 - lam) * 2.0 * (o @ e) / n1
        net.backward(do, caches)
    if n2 > 0:
        don = lam * (p @ basis) / (n2 * scale * scale)
        net.backward(don, ncaches)
    return DsdLoss(total, n1, n2)


def gram_drift(net: DebiasNet, x) -> float:
    """||O O^T - X X^T||_F / ||X X^T||_F for O = net(x)."""
    x = np.asarray(x, dtype=np.float64)
    o = net.forward(x)
    g = x @ x.T
    denom = float(np.linalg.norm(g))
    if denom == 0:
        raise ValueError("Gram drift is undefined for an all-zero batch")
    return float(np.linalg.norm(o @ o.T - g)) / denom


def forward_chunked(net: DebiasNet, x, chunk: int) -> np.ndarray:
    parts = [net.forward(x[i : i + chunk]) for i in range(0, len(x), chunk)]
    return np.concatenate(parts, axis=0) if parts else np.empty((0, net.dim))


def split_holdout(neutral: NeutralSet, fraction: float, rng) -> tuple:
    """(train neutral indices, held-out indices)."""
    idx = np.asarray(neutral.indices)
    n_hold = int(round(fraction * len(idx)))
    if n_hold == 0:
        return idx, idx[:0]
    if n_hold >= len(idx):
        raise DataError("holdout leaves no neutral words for training")
    perm = rng.permutation(len(idx))
    return np.sort(idx[perm[n_hold:]]), np.sort(idx[perm[:n_hold]])


def train_dsd(emb: EmbeddingSet, subspace: BiasSubspace, neutral: NeutralSet, cfg: TrainConfig, net=None) -> TrainResult:
    """Minibatch training; returns the net and row-normalized outputs for the whole vocabulary.

    Random draws, in order: network init, holdout split, then per epoch a
    vocabulary shuffle and one neutral subsample per step.
    """
    cfg = cfg.resolve(emb.dim)
    if len(neutral) == 0:
        raise DataError("neutral word set is empty")
    if subspace.dim != emb.dim:
        raise DataError(f"bias subspace is {subspace.dim}-d but embeddings are {emb.dim}-d")
    start = time.perf_counter()
    rng = make_rng(cfg.seed)
    if net is None:
        net = DebiasNet(emb.dim, cfg.blocks, rng)
    x = unit_rows(emb.matrix)
    train_neutral, held = split_holdout(neutral, cfg.holdout, rng)
    held_set = set(held.tolist())
    train_rows = np.array([i for i in range(len(x)) if i not in held_set], dtype=np.int64)
    n_sample = min(cfg.neutral_sample or cfg.batch_size, len(train_neutral))
    basis = subspace.basis
    state = OptimizerState(cfg.optimizer, cfg.lr)
    params = net.params

    history = []
    best = np.inf
    for epoch in range(cfg.epochs):
        last_good = net.state_dict()
        order = train_rows[rng.permutation(len(train_rows))]
        sums = np.zeros(3)
        n_steps = 0
        for lo in range(0, len(order), cfg.batch_size):
            rows = order[lo : lo + cfg.batch_size]
            nrows = train_neutral[rng.choice(len(train_neutral), size=n_sample, replace=False)]
            net.zero_grad()
            with np.errstate(over="ignore", invalid="ignore"):
                parts = dsd_loss(net, x[rows], x[nrows], basis, cfg.lam, cfg.loss, backward=True)
            if not np.isfinite(parts.total):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}", last_good, {"epoch": epoch, "step": n_steps})
            try:
                step(params, state)
            except DivergenceError as exc:
                raise DivergenceError(str(exc), last_good, {"epoch": epoch, "step": n_steps}) from None
            sums += (parts.total, parts.norm1, parts.norm2)
            n_steps += 1
        mean = sums / max(n_steps, 1)
        best = min(best, mean[0])
        history.append({"epoch": epoch, "total": mean[0], "norm1": mean[1], "norm2": mean[2], "best": best})
        if epoch % 25 == 0:
            log.debug("dsd epoch %d total %.6g best %.6g", epoch, mean[0], best)

    out = forward_chunked(net, x, cfg.batch_size)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("network output is non-finite", net.state_dict(), {"epoch": cfg.epochs})
    diag = {"n_train_rows": int(len(train_rows)), "n_neutral_train": int(len(train_neutral)), "n_holdout": int(len(held))}
    if len(held):
        diag["holdout_gram_drift"] = gram_drift(net, x[held])
        diag["holdout_indices"] = held.tolist()
    result_emb = emb.with_matrix(unit_rows(out))
    return TrainResult(net, result_emb, history, cfg, state, time.perf_counter() - start, diag)
