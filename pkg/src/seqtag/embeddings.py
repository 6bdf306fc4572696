"""Word vectors with hashed character n-gram composition for OOV words.

Three regimes: randomly initialized, pretrained and frozen, or pretrained
and fine-tuned during training. A word's vector is the average of its
lexical vector and its hashed n-gram bucket vectors; words outside the
vocabulary fall back to the bucket average, or to a designated UNK vector
when subword composition is off (plain text vector files carry no subword
table).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODES = ("random", "frozen", "finetuned")

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


class EmbeddingFormatError(Exception):
    """Malformed text vector file."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass
class EmbeddingConfig:
    dim: int = 300
    min_n: int = 3
    max_n: int = 6
    bucket_count: int = 50_000
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (1 <= self.min_n <= self.max_n):
            raise ValueError("need 1 <= min_n <= max_n")
        if self.bucket_count < 0:
            raise ValueError("bucket_count must be >= 0")


@dataclass
class EmbeddingTable:
    """Vector store: lexical rows, n-gram bucket rows, and an UNK row.

    ``subword`` controls whether n-gram composition participates in
    lookups; ``bucket_count`` must be >= 1 whenever it does. ``mode``
    decides what training may touch: nothing in frozen mode, the rows
    used by a batch otherwise.
    """

    dim: int
    vocab: dict[str, int]
    word_vectors: np.ndarray           # |V| x dim
    ngram_buckets: np.ndarray          # B x dim
    min_n: int
    max_n: int
    bucket_count: int
    mode: str = "frozen"
    subword: bool = True
    unk_vector: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.subword and self.bucket_count < 1:
            raise ValueError("subword composition needs bucket_count >= 1")
        if self.word_vectors.shape != (len(self.vocab), self.dim):
            raise ValueError("word_vectors shape does not match vocab/dim")
        if self.ngram_buckets.shape != (self.bucket_count, self.dim):
            raise ValueError("ngram_buckets shape does not match bucket_count/dim")
        if self.unk_vector is None:
            self.unk_vector = np.zeros(self.dim)

    @property
    def trainable(self):
        return self.mode in ("random", "finetuned")


def char_ngrams(word, min_n, max_n):
    """Character n-grams of '<word>' with lengths in [min_n, max_n].

    Substrings are taken over Unicode scalar values, ordered by start
    position then length, duplicates kept. The full wrapped form is the
    word's own lexical entry and is excluded.
    """
    if not word:
        raise ValueError("empty word")
    wrapped = f"<{word}>"
    n_chars = len(wrapped)
    grams = []
    for start in range(n_chars):
        for n in range(min_n, max_n + 1):
            end = start + n
            if end > n_chars:
                break
            if start == 0 and end == n_chars:
                continue
            grams.append(wrapped[start:end])
    return grams


def hash_ngram(ngram, bucket_count):
    """32-bit FNV-1a of the UTF-8 bytes, reduced modulo bucket_count."""
    if not ngram:
        raise ValueError("empty ngram")
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    h = _FNV_OFFSET
    for byte in ngram.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h % bucket_count


def ngram_bucket_ids(table, word):
    """Bucket row indices of a word's n-grams (empty when subword is off)."""
    if not table.subword:
        return []
    return [
        hash_ngram(g, table.bucket_count)
        for g in char_ngrams(word, table.min_n, table.max_n)
    ]


def embed(table, word):
    """Compose the vector for a word; always returns a fresh array.

    In-vocab with subword on: mean of the lexical row and every bucket
    row. In-vocab with subword off: the lexical row. OOV: mean of bucket
    rows, or the UNK vector when there are none to use.
    """
    idx = table.vocab.get(word)
    buckets = ngram_bucket_ids(table, word)
    if idx is not None:
        if not buckets:
            return table.word_vectors[idx].copy()
        total = table.word_vectors[idx] + table.ngram_buckets[buckets].sum(axis=0)
        return total / (1 + len(buckets))
    if buckets:
        return table.ngram_buckets[buckets].sum(axis=0) / len(buckets)
    return table.unk_vector.copy()


def load_text_vectors(lines, config, name_hint=""):
    """Read a "count dim" header plus one "word v1 .. v_dim" row per line.

    Buckets come back zero-initialized and subword composition off: text
    vector files carry no subword table. The UNK fallback is the mean of
    all loaded vectors. Callers pick the mode afterwards.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    else:
        lines = [l.rstrip("\n") for l in lines]
    if not lines or not lines[0].strip():
        raise EmbeddingFormatError("missing header line", line_no=1)
    header = lines[0].split()
    if len(header) != 2:
        raise EmbeddingFormatError("header must be 'count dim'", line_no=1)
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise EmbeddingFormatError("header must be 'count dim'", line_no=1) from None
    if dim != config.dim:
        raise EmbeddingFormatError(
            f"file dimension {dim} does not match configured dim {config.dim}"
        )

    vocab = {}
    vectors = np.zeros((count, dim))
    row = 0
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != dim + 1:
            raise EmbeddingFormatError(
                f"expected word + {dim} floats, got {len(parts)} fields", line_no
            )
        word = parts[0]
        if word in vocab:
            raise EmbeddingFormatError(f"duplicate word {word!r}", line_no)
        if row >= count:
            raise EmbeddingFormatError(
                f"more rows than the declared count {count}", line_no
            )
        try:
            vectors[row] = [float(x) for x in parts[1:]]
        except ValueError:
            raise EmbeddingFormatError("non-numeric vector component", line_no) from None
        vocab[word] = row
        row += 1
    if row != count:
        raise EmbeddingFormatError(f"declared {count} rows, found {row}")

    unk = vectors.mean(axis=0) if count else np.zeros(dim)
    return EmbeddingTable(
        dim=dim,
        vocab=vocab,
        word_vectors=vectors,
        ngram_buckets=np.zeros((config.bucket_count, dim)),
        min_n=config.min_n,
        max_n=config.max_n,
        bucket_count=config.bucket_count,
        mode="frozen",
        subword=False,
        unk_vector=unk,
    )


def init_random(vocab, config):
    """Fresh table over a vocabulary, uniform in [-0.5/dim, +0.5/dim].

    Word rows are drawn before bucket rows from one generator seeded with
    config.seed, so equal seeds give bitwise-equal tables.
    """
    words = list(vocab)
    if not words:
        raise ValueError("empty vocabulary")
    if len(set(words)) != len(words):
        raise ValueError("duplicate vocabulary entry")
    rng = np.random.default_rng(config.seed)
    bound = 0.5 / config.dim
    word_vectors = rng.uniform(-bound, bound, size=(len(words), config.dim))
    buckets = rng.uniform(-bound, bound, size=(config.bucket_count, config.dim))
    return EmbeddingTable(
        dim=config.dim,
        vocab={w: i for i, w in enumerate(words)},
        word_vectors=word_vectors,
        ngram_buckets=buckets,
        min_n=config.min_n,
        max_n=config.max_n,
        bucket_count=config.bucket_count,
        mode="random",
        subword=True,
    )
