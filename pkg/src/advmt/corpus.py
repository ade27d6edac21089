"""Corpus ingestion: vocabularies, token-id encoding, negative sampling, batching.

Corpus files are UTF-8 TSV, one ``query<TAB>reply`` per line, tokens
whitespace-separated and already segmented upstream.
"""
from __future__ import annotations

import collections
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


class CorpusError(ValueError):
    """Malformed or unreadable corpus data."""


@dataclass(frozen=True)
class Vocabulary:
    """Token<->id map with dense ids; id 0 is PAD, id 1 is UNK.

    Non-reserved tokens are ordered by descending corpus frequency, ties
    broken lexicographically, so construction is deterministic.
    """

    tokens: tuple[str, ...]
    index: dict[str, int] = field(compare=False)
    min_frequency: int = 1

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    @staticmethod
    def from_counts(counts: dict[str, int], min_frequency: int) -> "Vocabulary":
        kept = sorted(
            (t for t, c in counts.items() if c >= min_frequency),
            key=lambda t: (-counts[t], t),
        )
        tokens = (PAD_TOKEN, UNK_TOKEN, *kept)
        index = {t: i for i, t in enumerate(tokens)}
        return Vocabulary(tokens=tokens, index=index, min_frequency=min_frequency)

    @staticmethod
    def from_tokens(tokens, min_frequency: int = 1) -> "Vocabulary":
        """Rebuild from a stored non-reserved token list (checkpoint load)."""
        toks = (PAD_TOKEN, UNK_TOKEN, *tokens)
        index = {t: i for i, t in enumerate(toks)}
        return Vocabulary(tokens=toks, index=index, min_frequency=min_frequency)

    @property
    def nonreserved(self) -> tuple[str, ...]:
        return self.tokens[2:]


@dataclass(frozen=True)
class QueryReplyPair:
    query: tuple[int, ...]
    reply: tuple[int, ...]


@dataclass(frozen=True)
class TrainingTriple:
    query: tuple[int, ...]
    positive_reply: tuple[int, ...]
    negative_reply: tuple[int, ...]
    task: int

    def __post_init__(self):
        if self.negative_reply == self.positive_reply:
            raise CorpusError("negative reply equals positive reply")


@dataclass
class Batch:
    """Same-task triples padded to a common width per sequence role."""

    triples: list[TrainingTriple]
    query_ids: np.ndarray
    pos_ids: np.ndarray
    neg_ids: np.ndarray
    query_lengths: np.ndarray
    pos_lengths: np.ndarray
    neg_lengths: np.ndarray

    def __len__(self) -> int:
        return len(self.triples)


def read_pair_file(path) -> list[tuple[list[str], list[str]]]:
    """Read a TSV corpus into (query tokens, reply tokens) rows."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CorpusError(f"cannot read corpus file {path}: {e}") from e
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise CorpusError(
                f"{path}:{lineno}: expected 2 tab-separated columns, got {len(cols)}"
            )
        q, r = cols[0].split(), cols[1].split()
        if not q or not r:
            raise CorpusError(f"{path}:{lineno}: empty query or reply")
        rows.append((q, r))
    return rows


def build_vocab(corpus_path, min_frequency: int) -> Vocabulary:
    counts: collections.Counter[str] = collections.Counter()
    for q, r in read_pair_file(corpus_path):
        counts.update(q)
        counts.update(r)
    return Vocabulary.from_counts(counts, min_frequency)


def encode_sequence(text, vocab: Vocabulary) -> tuple[int, ...]:
    """Map tokens to ids; out-of-vocabulary tokens become UNK."""
    tokens = list(text)
    if not tokens:
        raise CorpusError("cannot encode an empty token list")
    return tuple(vocab.id_of(t) for t in tokens)


def encode_pairs(rows, vocab: Vocabulary) -> list[QueryReplyPair]:
    return [
        QueryReplyPair(encode_sequence(q, vocab), encode_sequence(r, vocab))
        for q, r in rows
    ]


def sample_negative(pairs, index: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw a reply uniformly from the pool, rejecting the gold reply."""
    gold = pairs[index].reply
    if all(p.reply == gold for p in pairs):
        raise CorpusError("cannot sample a negative: all replies are identical")
    while True:
        j = int(rng.integers(len(pairs)))
        if pairs[j].reply != gold:
            return pairs[j].reply


def make_triples(pairs, task: int, rng: np.random.Generator) -> list[TrainingTriple]:
    return [
        TrainingTriple(p.query, p.reply, sample_negative(pairs, i, rng), task)
        for i, p in enumerate(pairs)
    ]


def _pad(seqs) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    width = int(lengths.max())
    out = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out, lengths


def make_batches(triples, batch_size: int, rng: np.random.Generator) -> list[Batch]:
    """Shuffle, chunk and pad; the final partial batch is kept."""
    if not triples:
        raise CorpusError("cannot batch an empty triple list")
    if batch_size < 1:
        raise CorpusError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(len(triples))
    shuffled = [triples[i] for i in order]
    batches = []
    for start in range(0, len(shuffled), batch_size):
        chunk = shuffled[start : start + batch_size]
        q, ql = _pad([t.query for t in chunk])
        p, pl = _pad([t.positive_reply for t in chunk])
        n, nl = _pad([t.negative_reply for t in chunk])
        batches.append(Batch(chunk, q, p, n, ql, pl, nl))
    return batches


def unpad_row(ids: np.ndarray, length: int) -> tuple[int, ...]:
    return tuple(int(x) for x in ids[:length])


def train_dev_split(pairs, dev_every: int = 20) -> tuple[list, list]:
    """Deterministic split: every dev_every-th pair goes to dev (~5%)."""
    train, dev = [], []
    for i, p in enumerate(pairs):
        (dev if i % dev_every == dev_every - 1 else train).append(p)
    return train, dev


def save_vocab(vocab: Vocabulary, path):
    """Write one non-reserved token per line; line N (1-based, after the
    header) holds the token with id N+1."""
    lines = ["# advmt vocabulary: token on line N has id N+1 (ids 0/1 are PAD/UNK)"]
    lines.extend(vocab.nonreserved)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path, min_frequency: int = 1) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = [ln for ln in lines if ln and not ln.startswith("#")]
    return Vocabulary.from_tokens(tokens, min_frequency)
