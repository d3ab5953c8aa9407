"""Word-embedding storage: the word2vec text format, row normalization,
cosine similarity and averaged sentence vectors.

Words are stored as ROWS of a V x d float64 matrix everywhere in this package.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmbeddingFormatError

_ZERO_NORM = 0.0


@dataclass(frozen=True)
class EmbeddingSet:
    """An immutable vocabulary plus its V x d matrix of word vectors."""

    vocab: tuple[str, ...]
    matrix: np.ndarray
    name: str = ""
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vocab = tuple(self.vocab)
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2:
            raise EmbeddingFormatError(f"matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] != len(vocab):
            raise EmbeddingFormatError(
                f"vocab has {len(vocab)} tokens but matrix has {matrix.shape[0]} rows"
            )
        index = {}
        for i, tok in enumerate(vocab):
            if tok in index:
                raise EmbeddingFormatError(f"duplicate token {tok!r}")
            index[tok] = i
        if not np.all(np.isfinite(matrix)):
            raise EmbeddingFormatError("matrix contains NaN or Inf")
        matrix.setflags(write=False)
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "index", index)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, token):
        return token in self.index

    def vector(self, token: str) -> np.ndarray:
        return self.matrix[self.index[token]]

    def rows(self, tokens: Iterable[str]) -> np.ndarray:
        return self.matrix[[self.index[t] for t in tokens]]

    def with_matrix(self, matrix: np.ndarray, name: Optional[str] = None) -> "EmbeddingSet":
        """Same vocabulary, new vectors."""
        return EmbeddingSet(self.vocab, matrix, self.name if name is None else name)


@dataclass(frozen=True)
class SentenceVector:
    vector: np.ndarray
    used_tokens: int
    skipped_tokens: int


@dataclass(frozen=True)
class TokenizerConfig:
    """Lowercase, split on whitespace, strip leading/trailing punctuation."""

    lowercase: bool = True
    strip_punctuation: bool = True


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    if config.lowercase:
        text = text.lower()
    tokens = []
    for raw in text.split():
        tok = raw
        if config.strip_punctuation:
            start, end = 0, len(tok)
            while start < end and _is_punct(tok[start]):
                start += 1
            while end > start and _is_punct(tok[end - 1]):
                end -= 1
            tok = tok[start:end]
        if tok:
            tokens.append(tok)
    return tokens


def load_word2vec_text(path, name: Optional[str] = None) -> EmbeddingSet:
    """Parse a word2vec text file: a ``"V d"`` header then ``token v1 ... vd`` lines.

    Rejects malformed headers, rows of the wrong arity, non-finite values,
    duplicate tokens and all-zero rows.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{path}: header must be 'V d', got {header!r}")
        try:
            n_rows, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingFormatError(f"{path}: non-integer header {header!r}") from None
        if n_rows < 0 or dim < 1:
            raise EmbeddingFormatError(f"{path}: invalid header values {header!r}")

        vocab = []
        matrix = np.empty((n_rows, dim), dtype=np.float64)
        lineno = 1
        for line in fh:
            lineno += 1
            parts = line.split()
            if not parts:
                continue
            if len(vocab) == n_rows:
                raise EmbeddingFormatError(f"{path}:{lineno}: more rows than header declares")
            if len(parts) != dim + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}"
                )
            try:
                row = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}:{lineno}: {exc}") from None
            matrix[len(vocab)] = row
            vocab.append(parts[0])
    if len(vocab) != n_rows:
        raise EmbeddingFormatError(f"{path}: header declares {n_rows} rows, found {len(vocab)}")

    if not np.all(np.isfinite(matrix)):
        bad = int(np.argwhere(~np.isfinite(matrix))[0, 0])
        raise EmbeddingFormatError(f"{path}: non-finite value in row for {vocab[bad]!r}")
    zero = np.flatnonzero(np.linalg.norm(matrix, axis=1) == _ZERO_NORM)
    if zero.size:
        raise EmbeddingFormatError(f"{path}: zero-norm row for {vocab[zero[0]]!r}")
    return EmbeddingSet(tuple(vocab), matrix, name if name is not None else path.name)


def format_value(x: float) -> str:
    return f"{x:.9g}"


def save_word2vec_text(emb: EmbeddingSet, path) -> None:
    """Write ``emb`` with 9 significant digits per value."""
    if len(emb) == 0:
        raise EmbeddingFormatError("refusing to write an empty embedding set")
    lines = [f"{len(emb)} {emb.dim}\n"]
    for tok, row in zip(emb.vocab, emb.matrix):
        lines.append(tok + " " + " ".join(format_value(x) for x in row.tolist()) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise EmbeddingFormatError("cannot normalize a zero-norm row")
    return matrix / norms


def normalize_rows(emb: EmbeddingSet) -> EmbeddingSet:
    try:
        return emb.with_matrix(unit_rows(emb.matrix))
    except EmbeddingFormatError:
        zero = np.flatnonzero(np.linalg.norm(emb.matrix, axis=1) == 0)
        raise EmbeddingFormatError(f"zero-norm row for {emb.vocab[zero[0]]!r}") from None


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0 or nv == 0:
        raise ValueError("cosine of a zero vector is undefined")
    c = float(u @ v) / (nu * nv)
    return min(1.0, max(-1.0, c))


def mean_vector(emb: EmbeddingSet, tokens: Sequence[str]) -> Optional[SentenceVector]:
    """Average of the in-vocabulary rows among ``tokens`` (OOV skipped)."""
    rows = [emb.index[t] for t in tokens if t in emb.index]
    if not rows:
        return None
    vec = emb.matrix[rows].mean(axis=0)
    return SentenceVector(vec, len(rows), len(tokens) - len(rows))


def sentence_vector(
    emb: EmbeddingSet, text: str, tokenizer: TokenizerConfig = TokenizerConfig()
) -> Optional[SentenceVector]:
    return mean_vector(emb, tokenize(text, tokenizer))
