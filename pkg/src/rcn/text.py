"""Tweet tokenization, vocabulary, frozen word vectors, padded index encoding."""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, FormatError, ParseError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
URL_TOKEN = "<url>"
PAD_INDEX = 0
UNK_INDEX = 1

EMBEDDING_DIM = 200

_URL_PREFIXES = ("http://", "https://", "www.")
_STRIP_CHARS = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, normalize social-media artifacts.

    Hashtags lose their leading '#', @mentions are kept whole, URLs collapse
    to the ``<url>`` token, and surrounding punctuation is stripped while
    inside-word apostrophes survive.
    """
    tokens = []
    for raw in text.lower().split():
        if raw.startswith(_URL_PREFIXES):
            tokens.append(URL_TOKEN)
            continue
        tok = raw.lstrip("#")
        if tok.startswith("@"):
            core = tok[1:].strip(_STRIP_CHARS)
            if core:
                tokens.append("@" + core)
            continue
        tok = tok.strip(_STRIP_CHARS)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass
class Vocabulary:
    """Injective token -> index map; 0 is PAD, 1 is UNK."""

    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def tokens_in_order(self) -> list[str]:
        return sorted(self.index, key=self.index.get)

    def to_lines(self) -> str:
        return "".join(f"{tok}\t{idx}\n" for tok, idx in
                       sorted(self.index.items(), key=lambda kv: kv[1]))

    @classmethod
    def from_lines(cls, content: str) -> "Vocabulary":
        index: dict[str, int] = {}
        for lineno, line in enumerate(content.splitlines(), start=1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"vocabulary line {lineno}: expected token<TAB>index")
            index[parts[0]] = int(parts[1])
        return cls(index)


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Index tokens with frequency >= min_count after PAD/UNK.

    Ordering is (-frequency, token) so the result is a pure function of the
    corpus multiset.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    seen_any = False
    for tokens in corpus:
        seen_any = True
        counts.update(tokens)
    if not seen_any:
        raise DegenerateInputError("cannot build a vocabulary from an empty corpus")
    index = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
    kept = sorted((tok for tok, c in counts.items() if c >= min_count),
                  key=lambda tok: (-counts[tok], tok))
    for tok in kept:
        if tok in (PAD_TOKEN, UNK_TOKEN):
            raise ValueError(f"corpus token collides with reserved token {tok!r}")
        index[tok] = len(index)
    return Vocabulary(index)


@dataclass
class EmbeddingTable:
    """Frozen |vocab| x 200 word-vector matrix; PAD and OOV rows are zero."""

    matrix: np.ndarray
    frozen: bool = True

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != EMBEDDING_DIM:
            raise FormatError(f"embedding matrix must be |vocab| x {EMBEDDING_DIM}, "
                              f"got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def rows(self, indices: np.ndarray) -> np.ndarray:
        return self.matrix[indices]


def load_embeddings(path, vocab: Vocabulary) -> EmbeddingTable:
    """Read GloVe text format and fill rows for vocabulary words.

    One line per word: the word then 200 space-separated reals. Words absent
    from the file keep the zero vector; PAD is always zero.
    """
    matrix = np.zeros((len(vocab), EMBEDDING_DIM), dtype=np.float64)
    expected_fields: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split(" ")
            if expected_fields is None:
                expected_fields = len(fields)
                if expected_fields - 1 != EMBEDDING_DIM:
                    raise FormatError(
                        f"embedding file has {expected_fields - 1}-dimensional "
                        f"vectors, expected {EMBEDDING_DIM}")
            if len(fields) != expected_fields:
                raise ParseError(f"embedding line {lineno}: expected "
                                 f"{expected_fields} fields, got {len(fields)}")
            word = fields[0]
            if word not in vocab.index or word == PAD_TOKEN:
                continue
            try:
                matrix[vocab.index[word]] = [float(v) for v in fields[1:]]
            except ValueError as exc:
                raise ParseError(f"embedding line {lineno}: {exc}") from exc
    matrix[PAD_INDEX] = 0.0
    return EmbeddingTable(matrix)


def random_embeddings(vocab: Vocabulary, seed: int = 0) -> EmbeddingTable:
    """Deterministic random frozen vectors for corpora without GloVe coverage.

    Rows are unit-scaled gaussian draws keyed to the vocabulary order; PAD
    and UNK stay zero so padding invariance holds.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((len(vocab), EMBEDDING_DIM)) / np.sqrt(EMBEDDING_DIM)
    matrix[PAD_INDEX] = 0.0
    matrix[UNK_INDEX] = 0.0
    return EmbeddingTable(matrix)


@dataclass
class TokenizedUtterance:
    """Fixed-length index sequence with a left-aligned content mask."""

    indices: np.ndarray
    mask: np.ndarray
    text: str = ""

    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def length(self) -> int:
        return int(self.mask.sum())


def encode_tokens(tokens: Sequence[str], vocab: Vocabulary, max_len: int,
                  text: str = "") -> TokenizedUtterance:
    """Truncate to the first max_len tokens, pad with PAD, mark real tokens."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not tokens:
        raise DegenerateInputError(f"cannot encode an empty token sequence (text={text!r})")
    kept = list(tokens[:max_len])
    indices = np.full(max_len, PAD_INDEX, dtype=np.int64)
    mask = np.zeros(max_len, dtype=bool)
    for i, tok in enumerate(kept):
        indices[i] = vocab.lookup(tok)
        mask[i] = True
    return TokenizedUtterance(indices=indices, mask=mask, text=text, tokens=kept)


def encode_text(text: str, vocab: Vocabulary, max_len: int) -> TokenizedUtterance:
    return encode_tokens(tokenize(text), vocab, max_len, text=text)


def batch_encode(texts: Sequence[str], vocab: Vocabulary,
                 max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Encode many texts into stacked (N, max_len) index and mask arrays."""
    idx = np.empty((len(texts), max_len), dtype=np.int64)
    mask = np.empty((len(texts), max_len), dtype=bool)
    for i, text in enumerate(texts):
        enc = encode_text(text, vocab, max_len)
        idx[i] = enc.indices
        mask[i] = enc.mask
    return idx, mask
