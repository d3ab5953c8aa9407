"""Bias word lists, the bias subspace and the neutral word set.

A :class:`BiasSpec` names the groups of a bias category (e.g. ``he``/``she``),
the stereotype attribute lists used for evaluation, and evaluation targets.
:func:`build_subspace` turns the group anchor words into the matrix ``B`` whose
rows are unit bias directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .embeddings import EmbeddingSet, cosine
from .errors import BiasSpecError, DataError

SPEC_FORMAT = "softdebias.biasspec/1"
CATEGORIES = ("gender", "race", "religion", "custom")
DEGENERATE_TOL = 1e-12

NEUTRAL_POLICIES = ("explicit-list", "vocab-minus-bias-words")


@dataclass(frozen=True)
class BiasSpec:
    category: str
    groups: dict
    attribute_sets: dict
    targets: tuple
    neutral_words: Optional[tuple] = None
    paired: bool = False

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise BiasSpecError(f"unknown category {self.category!r}; expected one of {CATEGORIES}")
        groups = {str(k): tuple(v) for k, v in self.groups.items()}
        attrs = {str(k): tuple(v) for k, v in self.attribute_sets.items()}
        if len(groups) < 2:
            raise BiasSpecError("a bias spec needs at least two groups")
        for kind, lists in (("group", groups), ("attribute set", attrs)):
            for name, toks in lists.items():
                if not toks:
                    raise BiasSpecError(f"{kind} {name!r} is empty")
        if not attrs:
            raise BiasSpecError("a bias spec needs at least one attribute set")
        if not self.targets:
            raise BiasSpecError("targets list is empty")
        seen = {}
        for name, toks in groups.items():
            for tok in toks:
                if tok in seen and seen[tok] != name:
                    raise BiasSpecError(f"token {tok!r} appears in groups {seen[tok]!r} and {name!r}")
                seen[tok] = name
        if self.paired:
            lengths = {len(t) for t in groups.values()}
            if len(groups) != 2 or len(lengths) != 1:
                raise BiasSpecError("paired specs need exactly two groups of equal length")
        neutral = None if self.neutral_words is None else tuple(self.neutral_words)
        if neutral is not None and not neutral:
            raise BiasSpecError("neutral_words, when given, must be non-empty")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "attribute_sets", attrs)
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "neutral_words", neutral)

    @property
    def anchor_tokens(self) -> tuple:
        return tuple(tok for toks in self.groups.values() for tok in toks)

    @property
    def attribute_tokens(self) -> tuple:
        return tuple(tok for toks in self.attribute_sets.values() for tok in toks)

    def to_dict(self) -> dict:
        out = {
            "format": SPEC_FORMAT,
            "category": self.category,
            "paired": self.paired,
            "groups": {k: list(v) for k, v in self.groups.items()},
            "attribute_sets": {k: list(v) for k, v in self.attribute_sets.items()},
            "targets": list(self.targets),
        }
        if self.neutral_words is not None:
            out["neutral_words"] = list(self.neutral_words)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BiasSpec":
        fmt = data.get("format", SPEC_FORMAT)
        if fmt != SPEC_FORMAT:
            raise BiasSpecError(f"unsupported bias spec format {fmt!r}")
        try:
            return cls(
                category=data["category"],
                groups=data["groups"],
                attribute_sets=data["attribute_sets"],
                targets=data["targets"],
                neutral_words=data.get("neutral_words"),
                paired=bool(data.get("paired", False)),
            )
        except KeyError as exc:
            raise BiasSpecError(f"bias spec is missing key {exc.args[0]!r}") from None


def load_bias_spec(path) -> BiasSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise BiasSpecError(f"{path}: {exc}") from None
    return BiasSpec.from_dict(data)


def save_bias_spec(spec: BiasSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


def default_spec(category: str) -> BiasSpec:
    """One of the shipped word-list specs: gender, race or religion."""
    if category not in ("gender", "race", "religion"):
        raise BiasSpecError(f"no shipped spec for {category!r}")
    text = resources.files("softdebias.data").joinpath(f"{category}.json").read_text("utf-8")
    return BiasSpec.from_dict(json.loads(text))


@dataclass(frozen=True)
class BiasSubspace:
    basis: np.ndarray  # k x d, unit rows
    neutral_ref: np.ndarray
    source_tokens: tuple

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class NeutralSet:
    indices: np.ndarray
    policy: str
    missing: tuple = field(default=())

    def __len__(self):
        return len(self.indices)

    @property
    def warnings(self) -> tuple:
        return tuple(f"neutral word {t!r} not in vocabulary, skipped" for t in self.missing)


def _require(emb: EmbeddingSet, tokens: Sequence[str], what: str):
    missing = [t for t in tokens if t not in emb]
    if missing:
        raise DataError(f"{what} not in vocabulary: {', '.join(missing)}")


def build_subspace(emb: EmbeddingSet, spec: BiasSpec) -> BiasSubspace:
    """Mean-subtract the group anchor vectors and stack them as unit rows.

    The neutral reference is the mean over all anchors. Each row is the unit
    vector of (anchor - reference), or, for paired specs, of (anchor - mean of
    its pair), so a single he/she pair gives the rows +/- unit(he - she).
    """
    anchors = spec.anchor_tokens
    _require(emb, anchors, "anchor tokens")
    vecs = emb.rows(anchors)
    neutral_ref = vecs.mean(axis=0)

    if spec.paired:
        left, right = spec.groups.values()
        centres = {}
        for a, b in zip(left, right):
            mid = (emb.vector(a) + emb.vector(b)) / 2.0
            centres[a] = centres[b] = mid
        diffs = np.stack([emb.vector(t) - centres[t] for t in anchors])
    else:
        diffs = vecs - neutral_ref

    norms = np.linalg.norm(diffs, axis=1)
    scale = max(1.0, float(np.max(np.abs(vecs))))
    bad = [t for t, n in zip(anchors, norms) if n <= DEGENERATE_TOL * scale]
    if bad:
        raise DataError(f"degenerate bias direction for anchors: {', '.join(bad)}")
    basis = diffs / norms[:, None]
    return BiasSubspace(basis, neutral_ref, tuple(anchors))


def neutral_set(emb: EmbeddingSet, spec: BiasSpec) -> NeutralSet:
    """Rows of ``emb`` treated as bias-neutral.

    An explicit ``spec.neutral_words`` list wins; OOV entries are dropped and
    reported in ``missing``. Otherwise every vocabulary row that is not a
    group, attribute or target token.
    """
    bias_words = set(spec.anchor_tokens) | set(spec.attribute_tokens) | set(spec.targets)
    if spec.neutral_words is not None:
        present = [t for t in spec.neutral_words if t in emb and t not in bias_words]
        missing = tuple(t for t in spec.neutral_words if t not in emb)
        idx = np.array(sorted({emb.index[t] for t in present}), dtype=np.int64)
        result = NeutralSet(idx, "explicit-list", missing)
    else:
        idx = np.array([i for i, t in enumerate(emb.vocab) if t not in bias_words], dtype=np.int64)
        result = NeutralSet(idx, "vocab-minus-bias-words")
    if len(result) == 0:
        raise DataError("neutral word set is empty")
    return result


def direct_bias(emb: EmbeddingSet, word: str, axis: tuple) -> float:
    """|cos| between a word and the axis ``v_a - v_b`` (e.g. he - she)."""
    a, b = axis
    _require(emb, (word, a, b), "tokens")
    direction = emb.vector(a) - emb.vector(b)
    if not np.any(direction):
        raise DataError(f"zero bias axis: {a!r} and {b!r} have identical vectors")
    return abs(cosine(emb.vector(word), direction))


def projection_energy(vectors: np.ndarray, subspace) -> float:
    """Mean over rows of the squared projections onto the bias rows."""
    basis = subspace.basis if isinstance(subspace, BiasSubspace) else np.asarray(subspace)
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[1] != basis.shape[1]:
        raise ValueError(f"dimension mismatch: vectors are {vectors.shape[1]}-d, basis {basis.shape[1]}-d")
    if len(vectors) == 0:
        return 0.0
    proj = vectors @ basis.T
    return float(np.sum(proj * proj) / len(vectors))
