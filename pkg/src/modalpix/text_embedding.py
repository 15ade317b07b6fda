"""Skip-gram word embeddings over tokenized text.

The vectors produced here are the raw material for the pixel encoder: every
word becomes a ``dim``-length vector whose components are later quantized to
bytes and packed into RGB triples.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_SPLIT_RE = re.compile(r"[^0-9a-z]+")
EMB_MAGIC = "CHAM-EMB"
EMB_VERSION = "v1"


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on runs of non-alphanumeric characters."""
    return [tok for tok in _SPLIT_RE.split(text.lower()) if tok]


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    counts: dict[str, int]
    id_of: dict[str, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.id_of


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Collect tokens seen at least ``min_count`` times.

    Ids are assigned by descending frequency; ties are broken
    lexicographically so the result does not depend on corpus order.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counter: Counter[str] = Counter()
    for sentence in corpus:
        counter.update(sentence)
    kept = sorted(
        ((w, c) for w, c in counter.items() if c >= min_count),
        key=lambda wc: (-wc[1], wc[0]),
    )
    if not kept:
        raise ValueError("vocabulary is empty after applying min_count")
    words = tuple(w for w, _ in kept)
    return Vocabulary(
        words=words,
        counts=dict(kept),
        id_of={w: i for i, w in enumerate(words)},
    )


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 36
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 3 or self.dim % 3:
            raise ValueError(f"dim must be a positive multiple of 3, got {self.dim}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")


@dataclass(frozen=True)
class EmbeddingTable:
    """Word vectors stored row-wise in vocabulary id order.

    Vectors are kept as float32 so the 9-significant-digit text format
    round-trips them exactly.
    """

    words: tuple[str, ...]
    matrix: np.ndarray
    global_min: float
    global_max: float
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.words):
            raise ValueError("matrix must have one row per word")
        if self.matrix.shape[1] % 3:
            raise ValueError(f"dim must be divisible by 3, got {self.matrix.shape[1]}")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    @classmethod
    def from_matrix(cls, words: Sequence[str], matrix: np.ndarray) -> "EmbeddingTable":
        matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        return cls(tuple(words), matrix, float(matrix.min()), float(matrix.max()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {w: self.matrix[i] for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index


def lookup(table: EmbeddingTable, word: str) -> np.ndarray | None:
    """Return the vector for ``word``, or ``None`` if it is out of vocabulary."""
    i = table._index.get(word)
    if i is None:
        return None
    return table.matrix[i]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _center_context_pairs(ids: Sequence[np.ndarray], window: int) -> np.ndarray:
    pairs = []
    for sent in ids:
        n = len(sent)
        for pos in range(n):
            lo, hi = max(0, pos - window), min(n, pos + window + 1)
            for ctx in range(lo, hi):
                if ctx != pos:
                    pairs.append((sent[pos], sent[ctx]))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def train_skipgram(
    corpus: Sequence[Sequence[str]], vocab: Vocabulary, cfg: SkipGramConfig
) -> EmbeddingTable:
    """Train skip-gram embeddings with negative sampling.

    Plain per-pair SGD on the logistic loss
    ``-log s(u_c . v_w) - sum_k log s(-u_k . v_w)`` where ``v`` are input
    (center) vectors and ``u`` output (context) vectors.  Negatives are drawn
    from the unigram distribution raised to 0.75.  The learning rate decays
    linearly from ``cfg.learning_rate`` to ``cfg.min_learning_rate`` over
    all updates.  The returned table holds the input vectors.
    """
    ids = []
    for sent in corpus:
        try:
            ids.append(np.fromiter((vocab.id_of[t] for t in sent), dtype=np.int64))
        except KeyError as exc:
            raise KeyError(f"token {exc.args[0]!r} is not in the vocabulary") from None

    rng = np.random.default_rng(cfg.seed)
    V, dim = len(vocab), cfg.dim
    w_in = (rng.random((V, dim)) - 0.5) / dim
    w_out = np.zeros((V, dim))

    freq = np.array([vocab.counts[w] for w in vocab.words], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(freq / freq.sum())
    noise_cdf[-1] = 1.0

    pairs = _center_context_pairs(ids, cfg.window)
    total = max(1, len(pairs) * cfg.epochs)
    lr0, lr_min = cfg.learning_rate, cfg.min_learning_rate
    step = 0
    labels = np.zeros(cfg.negatives + 1)
    labels[0] = 1.0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        negs = np.searchsorted(noise_cdf, rng.random((len(pairs), cfg.negatives)), side="right")
        for i in order:
            center, context = pairs[i]
            lr = max(lr_min, lr0 - (lr0 - lr_min) * step / total)
            step += 1
            targets = np.concatenate(([context], negs[i]))
            keep = np.ones(len(targets), dtype=bool)
            keep[1:] = targets[1:] != context
            targets = targets[keep]
            v = w_in[center]
            u = w_out[targets]
            g = (labels[keep] - _sigmoid(u @ v)) * lr
            # np.add.at: a negative may be drawn more than once
            grad_v = g @ u
            np.add.at(w_out, targets, np.outer(g, v))
            w_in[center] += grad_v
    return EmbeddingTable.from_matrix(vocab.words, w_in)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    lines = [
        f"{EMB_MAGIC} {EMB_VERSION} {len(table)} {table.dim} "
        f"{table.global_min:.9g} {table.global_max:.9g}"
    ]
    for word, row in zip(table.words, table.matrix):
        lines.append(word + " " + " ".join(f"{x:.9g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path: str | Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0] != EMB_MAGIC or header[1] != EMB_VERSION:
            raise ValueError(f"{path}: not a {EMB_MAGIC} {EMB_VERSION} file")
        size, dim = int(header[2]), int(header[3])
        words, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} components")
            words.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(words) != size:
        raise ValueError(f"{path}: header declares {size} words, found {len(words)}")
    matrix = np.asarray(rows, dtype=np.float32).reshape(size, dim)
    table = EmbeddingTable(tuple(words), matrix, float(np.float32(header[4])), float(np.float32(header[5])))
    return table
