"""Referenced word-overlap metrics: sentence BLEU, ROUGE-L, Greedy Matching."""
from __future__ import annotations

import collections
import math
from pathlib import Path

import numpy as np


class MetricError(ValueError):
    pass


def _require_nonempty(name, *seqs):
    for s in seqs:
        if len(s) == 0:
            raise MetricError(f"{name}: empty input sequence")


def ngram_counts(tokens, n: int) -> collections.Counter:
    return collections.Counter(
        tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypothesis, reference, max_n: int = 4, smooth: bool = True) -> float:
    """Sentence-level BLEU with clipped modified precisions.

    With ``smooth`` enabled, orders n >= 2 get add-one smoothing on both
    numerator and denominator (unigrams are left exact). Brevity penalty
    applies only when the hypothesis is shorter than the reference.
    """
    hypothesis, reference = list(hypothesis), list(reference)
    _require_nonempty("bleu", hypothesis, reference)
    if not 1 <= max_n <= 4:
        raise MetricError(f"bleu: max_n must be in 1..4, got {max_n}")

    log_sum = 0.0
    for n in range(1, max_n + 1):
        hyp = ngram_counts(hypothesis, n)
        ref = ngram_counts(reference, n)
        clipped = sum(min(c, ref[g]) for g, c in hyp.items())
        total = max(0, len(hypothesis) - n + 1)
        if smooth and n >= 2:
            clipped += 1
            total += 1
        if clipped == 0 or total == 0:
            return 0.0
        log_sum += math.log(clipped / total) / max_n

    bp = 1.0
    if len(hypothesis) < len(reference):
        bp = math.exp(1.0 - len(reference) / len(hypothesis))
    return bp * math.exp(log_sum)


def _lcs_length(a, b) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(hypothesis, reference) -> float:
    """LCS-based F1; zero when the sequences share no common subsequence."""
    hypothesis, reference = list(hypothesis), list(reference)
    _require_nonempty("rouge_l", hypothesis, reference)
    lcs = _lcs_length(hypothesis, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(hypothesis)
    r = lcs / len(reference)
    return 2 * p * r / (p + r)


class WordEmbeddings:
    """Token -> vector lookup used by greedy matching; OOV maps to UNK."""

    def __init__(self, index: dict[str, int], matrix: np.ndarray, unk_id: int = 1):
        self.index = index
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.unk_id = unk_id

    def vector(self, token: str) -> np.ndarray:
        return self.matrix[self.index.get(token, self.unk_id)]

    @staticmethod
    def from_model(model, task) -> "WordEmbeddings":
        """Concatenated shared+private embedding rows of one task."""
        parts = [task.emb_shared.weight.value, task.emb_private.weight.value] \
            if model.multi_task else [task.emb_private.weight.value]
        return WordEmbeddings(dict(task.vocab.index), np.hstack(parts))

    @staticmethod
    def from_text_file(path) -> "WordEmbeddings":
        """Load ``token v1 v2 ... v_d`` lines; an <unk> row is added if absent."""
        index, rows = {}, []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(),
                                      start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 2:
                raise MetricError(f"{path}:{lineno}: expected 'token v1 ...'")
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError as e:
                raise MetricError(f"{path}:{lineno}: bad vector component: {e}") from e
            index[parts[0]] = len(rows)
            rows.append(vec)
        if not rows:
            raise MetricError(f"{path}: empty embedding file")
        matrix = np.array(rows)
        if "<unk>" not in index:
            index["<unk>"] = len(rows)
            matrix = np.vstack([matrix, np.zeros(matrix.shape[1])])
        return WordEmbeddings(index, matrix, unk_id=index["<unk>"])


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def _directed_greedy(src, dst, emb: WordEmbeddings) -> float:
    dst_vecs = [emb.vector(t) for t in dst]
    return float(np.mean([
        max(_cosine(emb.vector(s), d) for d in dst_vecs) for s in src
    ]))


def greedy_matching(hypothesis, reference, emb: WordEmbeddings) -> float:
    """Symmetrized greedy cosine matching, in [-1, 1]."""
    hypothesis, reference = list(hypothesis), list(reference)
    _require_nonempty("greedy_matching", hypothesis, reference)
    return 0.5 * (_directed_greedy(hypothesis, reference, emb)
                  + _directed_greedy(reference, hypothesis, emb))
