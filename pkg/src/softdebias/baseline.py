"""Linear soft debiasing: learn a d x d matrix T that keeps the vocabulary's
inner products while pushing neutral words off the bias subspace.

Transformed words are rows of ``X @ T.T``. The inner-product term uses the SVD
``X.T = u diag(s) v.T`` so that

    ||(X T^T)(X T^T)^T - X X^T||_F = ||diag(s) u^T (T^T T - I) u diag(s)||_F

and training cost does not depend on the vocabulary size.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .bias_space import BiasSubspace, NeutralSet
from .config import TrainConfig
from .embeddings import EmbeddingSet, unit_rows
from .errors import DataError, DivergenceError
from .optim import OptimizerState, ParamTensor, step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvdFactors:
    u: np.ndarray
    s: np.ndarray
    t1: np.ndarray  # diag(s) @ u.T
    t2: np.ndarray  # u @ diag(s)


def factor(matrix: np.ndarray) -> SvdFactors:
    """SVD factors of the V x d word matrix; ``s`` is zero-padded to length d."""
    w = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise DataError("cannot factor a matrix with non-finite entries")
    d = w.shape[1]
    u, s, _ = np.linalg.svd(w.T, full_matrices=True)
    if s.size < d:
        s = np.concatenate([s, np.zeros(d - s.size)])
    return SvdFactors(u, s, s[:, None] * u.T, u * s[None, :])


@dataclass(frozen=True)
class LossParts:
    total: float
    norm1: float
    norm2: float


def _scales(f: SvdFactors, neutral: np.ndarray, basis: np.ndarray):
    s_scale = float(f.s @ f.s)
    n_scale = float(np.sqrt(neutral.shape[0] * basis.shape[0]))
    return (s_scale if s_scale > 0 else 1.0), n_scale


def baseline_loss(t, f: SvdFactors, neutral, basis, lam: float, transform_bias=False, with_grad=False):
    """Weighted loss ``(1-lam) norm1 / ||s||^2 + lam norm2 / sqrt(m k)``.

    norm1 = ||t1 (T^T T - I) t2||_F and norm2 = ||N T^T B^T||_F, or
    ||N T^T T B^T||_F when ``transform_bias`` is set. With ``with_grad`` the
    gradient with respect to T is returned as a second value.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    t = np.asarray(t, dtype=np.float64)
    basis = basis.basis if isinstance(basis, BiasSubspace) else np.asarray(basis)
    d = t.shape[0]
    s_scale, n_scale = _scales(f, neutral, basis)

    gram = t.T @ t
    r = f.t1 @ (gram - np.eye(d)) @ f.t2
    norm1 = float(np.linalg.norm(r))
    if transform_bias:
        p = neutral @ gram @ basis.T
    else:
        p = neutral @ t.T @ basis.T
    norm2 = float(np.linalg.norm(p))
    total = (1.0 - lam) * norm1 / s_scale + lam * norm2 / n_scale
    parts = LossParts(total, norm1, norm2)
    if not with_grad:
        return parts

    grad = np.zeros_like(t)
    if norm1 > 0:
        g = f.t1.T @ r @ f.t2.T / norm1
        grad += (1.0 - lam) / s_scale * (t @ (g + g.T))
    if norm2 > 0:
        if transform_bias:
            c = neutral.T @ p @ basis / norm2
            grad += lam / n_scale * (t @ (c + c.T))
        else:
            grad += lam / n_scale * (basis.T @ p.T @ neutral / norm2)
    return parts, grad


@dataclass
class TrainResult:
    model: object
    embeddings: EmbeddingSet
    history: list
    config: TrainConfig
    optimizer: OptimizerState
    seconds: float
    diagnostics: dict


def train_baseline(emb: EmbeddingSet, subspace: BiasSubspace, neutral: NeutralSet, cfg: TrainConfig) -> TrainResult:
    """Full-batch training of T from the identity; returns row-normalized ``X T^T``."""
    cfg = cfg.resolve(emb.dim)
    if len(neutral) == 0:
        raise DataError("neutral word set is empty")
    if subspace.dim != emb.dim:
        raise DataError(f"bias subspace is {subspace.dim}-d but embeddings are {emb.dim}-d")
    start = time.perf_counter()
    x = unit_rows(emb.matrix)
    f = factor(x)
    nmat = x[neutral.indices]
    t = ParamTensor("T", np.eye(emb.dim))
    state = OptimizerState(cfg.optimizer, cfg.lr)
    history = []
    best = np.inf
    for epoch in range(cfg.epochs):
        last_good = t.values.copy()
        with np.errstate(over="ignore", invalid="ignore"):
            parts, grad = baseline_loss(t.values, f, nmat, subspace.basis, cfg.lam, cfg.transform_bias, with_grad=True)
        if not np.isfinite(parts.total):
            raise DivergenceError(f"baseline loss became non-finite at epoch {epoch}", last_good, {"epoch": epoch})
        best = min(best, parts.total)
        history.append({"epoch": epoch, "total": parts.total, "norm1": parts.norm1, "norm2": parts.norm2, "best": best})
        t.grad[...] = grad
        try:
            step([t], state)
        except DivergenceError as exc:
            raise DivergenceError(str(exc), last_good, {"epoch": epoch}) from None
        if not np.all(np.isfinite(t.values)):
            raise DivergenceError(f"transform became non-finite at epoch {epoch}", last_good, {"epoch": epoch})
        if epoch % 25 == 0:
            log.debug("baseline epoch %d total %.6g best %.6g", epoch, parts.total, best)

    final = baseline_loss(t.values, f, nmat, subspace.basis, cfg.lam, cfg.transform_bias)
    out = emb.with_matrix(unit_rows(x @ t.values.T))
    diag = {"final_total": final.total, "final_norm1": final.norm1, "final_norm2": final.norm2}
    return TrainResult(t.values.copy(), out, history, cfg, state, time.perf_counter() - start, diag)
