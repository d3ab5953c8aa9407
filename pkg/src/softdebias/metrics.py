"""Bias metrics on word embeddings: mean average cosine distance (MAC) with a
paired sign-flip significance test, Stereotype Score and the CrowS-Pairs
score computed from averaged sentence vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embeddings import EmbeddingSet, TokenizerConfig, cosine, mean_vector, tokenize
from .errors import DataError
from .optim import make_rng


@dataclass(frozen=True)
class MacReport:
    per_pair: tuple  # (target, attribute-set name, mean cosine distance)
    mac: float
    n_pairs: int
    excluded_targets: tuple = ()
    excluded_attributes: tuple = ()
    p_value: Optional[float] = None

    @property
    def keys(self):
        return [(t, a) for t, a, _ in self.per_pair]

    @property
    def distances(self) -> np.ndarray:
        return np.array([d for _, _, d in self.per_pair])


def mac(emb: EmbeddingSet, targets, attribute_sets: dict) -> MacReport:
    """Mean over (target, attribute set) of mean_a (1 - cos(t, a)).

    OOV targets and attributes are skipped and listed in the report. A set
    with no in-vocabulary attribute contributes no pairs.
    """
    in_targets = [t for t in targets if t in emb]
    missing_t = tuple(t for t in targets if t not in emb)
    if not in_targets:
        raise DataError("all MAC targets are out of vocabulary")
    missing_a = []
    norms = np.linalg.norm(emb.matrix, axis=1)
    per_pair = []
    for t in in_targets:
        tv = emb.vector(t) / norms[emb.index[t]]
        for name, attrs in attribute_sets.items():
            present = [a for a in attrs if a in emb]
            if t == in_targets[0]:
                missing_a.extend(a for a in attrs if a not in emb)
            if not present:
                continue
            idx = [emb.index[a] for a in present]
            cos = np.clip((emb.matrix[idx] @ tv) / norms[idx], -1.0, 1.0)
            per_pair.append((t, name, float(np.mean(1.0 - cos))))
    if not per_pair:
        raise DataError("no attribute set has an in-vocabulary word")
    value = float(np.mean([d for _, _, d in per_pair]))
    return MacReport(tuple(per_pair), value, len(per_pair), missing_t, tuple(missing_a))


@dataclass(frozen=True)
class PermutationResult:
    p_value: float
    observed: float
    count: int
    n_perm: int
    exact: bool


def _sign_matrix(n: int) -> np.ndarray:
    codes = np.arange(2**n, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return 1.0 - 2.0 * bits


def paired_permutation_test(deltas, n_perm: int = 10000, seed: int = 0, exact="auto") -> PermutationResult:
    """Two-sided sign-flip test on the mean of paired differences.

    With ``exact="auto"`` all 2^n sign patterns are enumerated when
    2^n <= n_perm (p = count / 2^n); otherwise n_perm random patterns are
    drawn and p = (count + 1) / (n_perm + 1).
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    n = deltas.size
    if n == 0:
        raise DataError("permutation test needs at least one pair")
    if n_perm < 1:
        raise ValueError("n_perm must be positive")
    observed = abs(float(deltas.mean()))
    thresh = observed - 1e-12 * max(observed, np.abs(deltas).max(), 1e-300)
    use_exact = (2**n <= n_perm) if exact == "auto" else bool(exact)
    if use_exact:
        signs = _sign_matrix(n)
        stats = np.abs(signs @ deltas) / n
        count = int(np.sum(stats >= thresh))
        return PermutationResult(count / len(signs), observed, count, len(signs), True)
    rng = make_rng(seed)
    count = 0
    chunk = 4096
    for lo in range(0, n_perm, chunk):
        size = min(chunk, n_perm - lo)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(size, n))
        count += int(np.sum(np.abs(signs @ deltas) / n >= thresh))
    return PermutationResult((count + 1) / (n_perm + 1), observed, count, n_perm, False)


def mac_significance(before: MacReport, after: MacReport, n_perm: int = 10000, seed: int = 0, exact="auto") -> float:
    if before.keys != after.keys:
        raise DataError("MAC reports cover different (target, attribute set) pairs")
    return paired_permutation_test(after.distances - before.distances, n_perm, seed, exact).p_value


@dataclass(frozen=True)
class ScoreReport:
    score: float
    counted: int
    excluded: int
    ties: int
    agreements: float = 0.0
    details: dict = field(default_factory=dict)


SsReport = ScoreReport
CrowsReport = ScoreReport


def _agreement(ctx, first, second) -> tuple:
    a, b = cosine(ctx, first), cosine(ctx, second)
    if a > b:
        return 1.0, False
    if a == b:
        return 0.5, True
    return 0.0, False


def _vec(emb, tokens):
    sv = mean_vector(emb, tokens)
    if sv is None or not np.any(sv.vector):
        return None
    return sv.vector


def stereotype_score(emb: EmbeddingSet, examples, tokenizer: TokenizerConfig = TokenizerConfig()) -> ScoreReport:
    """Share of examples whose context vector is closer to the stereotypical
    continuation than to the anti-stereotypical one, times 100."""
    agree, counted, excluded, ties = 0.0, 0, 0, 0
    for ex in examples:
        vecs = [_vec(emb, tokenize(s, tokenizer)) for s in (ex.context, ex.stereo_sentence, ex.anti_sentence)]
        if any(v is None for v in vecs):
            excluded += 1
            continue
        a, tie = _agreement(*vecs)
        agree += a
        ties += tie
        counted += 1
    if counted == 0:
        raise DataError("no StereoSet example has in-vocabulary words in all three sentences")
    return ScoreReport(100.0 * agree / counted, counted, excluded, ties, agree)


def lcs_diff(a, b) -> tuple:
    """(common tokens, tokens only in a, tokens only in b) by longest common subsequence."""
    n, m = len(a), len(b)
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                table[i, j] = table[i + 1, j + 1] + 1
            else:
                table[i, j] = max(table[i + 1, j], table[i, j + 1])
    common, only_a, only_b = [], [], []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            common.append(a[i])
            i += 1
            j += 1
        elif table[i + 1, j] >= table[i, j + 1]:
            only_a.append(a[i])
            i += 1
        else:
            only_b.append(b[j])
            j += 1
    only_a.extend(a[i:])
    only_b.extend(b[j:])
    return common, only_a, only_b


def crows_score(emb: EmbeddingSet, pairs, tokenizer: TokenizerConfig = TokenizerConfig()) -> ScoreReport:
    """(stereo agreements + antistereo agreements) * 100 / N.

    The context vector averages the tokens shared by both sentences; each side
    is represented by the average of its own differing tokens. A stereo pair
    agrees when the context is closer to ``sent_more``'s tokens, an
    antistereo pair when it is closer to ``sent_less``'s.
    """
    stereo, anti, counted, excluded, ties = 0.0, 0.0, 0, 0, 0
    for pair in pairs:
        common, u_more, u_less = lcs_diff(tokenize(pair.sent_more, tokenizer), tokenize(pair.sent_less, tokenizer))
        ctx, vm, vl = (_vec(emb, toks) if toks else None for toks in (common, u_more, u_less))
        if ctx is None or vm is None or vl is None:
            excluded += 1
            continue
        if pair.stereo_antistereo == "stereo":
            a, tie = _agreement(ctx, vm, vl)
            stereo += a
        else:
            a, tie = _agreement(ctx, vl, vm)
            anti += a
        ties += tie
        counted += 1
    if counted == 0:
        raise DataError("every CrowS pair was excluded")
    score = (stereo + anti) * 100.0 / counted
    return ScoreReport(score, counted, excluded, ties, stereo + anti, {"stereo_agree": stereo, "antistereo_agree": anti})
