"""Pretrained word-vector loading and vocabulary-aligned embedding matrices.

Two on-disk formats are supported. The binary format starts with an ASCII
header ``"<vocab_size> <dim>\\n"`` followed by ``vocab_size`` entries, each a
word (bytes up to a 0x20 space) and ``dim`` little-endian float32 values; a
newline before the next word is skipped. The text format is one entry per
line: the word, then ``dim`` space-separated decimals, no header.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from pathlib import Path

import numpy as np

from .data import UNK_ID, UNK_TOKEN

log = logging.getLogger(__name__)

OOV_SCALE = 0.25


class EmbeddingFormatError(ValueError):
    """A malformed word-vector file, with the byte offset where parsing died."""


class WordVectorStore:
    """An immutable word -> float64 vector map with a fixed dimension."""

    def __init__(self, vectors, dim):
        self.vectors = vectors
        self.dim = dim
        for word, vec in vectors.items():
            if vec.shape != (dim,):
                raise EmbeddingFormatError(
                    f"vector for {word!r} has shape {vec.shape}, declared dim {dim}")

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word in self.vectors

    def get(self, word):
        return self.vectors.get(word)


def load_word2vec_binary(path, expected_dim=None):
    """Read a binary word-vector file into a :class:`WordVectorStore`.

    Vectors are widened to float64 in memory. Truncated files raise
    :class:`EmbeddingFormatError` with the byte offset; so does a header
    dimension different from ``expected_dim`` when one is given.
    """
    path = Path(path)
    blob = path.read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise EmbeddingFormatError(f"{path}: no header line (byte offset 0)")
    parts = blob[:nl].split()
    if len(parts) != 2:
        raise EmbeddingFormatError(f"{path}: header must be '<vocab_size> <dim>' (byte offset 0)")
    try:
        declared, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise EmbeddingFormatError(f"{path}: non-integer header fields (byte offset 0)") from None
    if declared < 0 or dim < 1:
        raise EmbeddingFormatError(f"{path}: bad header values {declared} {dim}")
    if expected_dim is not None and dim != expected_dim:
        raise EmbeddingFormatError(f"{path}: dimension {dim} does not match expected {expected_dim}")

    vectors = {}
    offset = nl + 1
    record = 4 * dim
    for _ in range(declared):
        while offset < len(blob) and blob[offset:offset + 1] == b"\n":
            offset += 1
        space = blob.find(b" ", offset)
        if space < 0:
            raise EmbeddingFormatError(
                f"{path}: truncated while reading a word (byte offset {offset})")
        word = blob[offset:space].decode("utf-8", errors="replace")
        start = space + 1
        if start + record > len(blob):
            raise EmbeddingFormatError(
                f"{path}: truncated vector for {word!r} (byte offset {start})")
        vectors[word] = np.frombuffer(blob[start:start + record], dtype="<f4").astype(np.float64)
        offset = start + record
    return WordVectorStore(vectors, dim)


def write_word2vec_binary(path, vectors, dim):
    """Write vectors in the binary format (float32 on disk)."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"{len(vectors)} {dim}\n".encode("ascii"))
        for word, vec in vectors.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise EmbeddingFormatError(f"vector for {word!r} has shape {vec.shape}, want ({dim},)")
            fh.write(word.encode("utf-8") + b" ")
            fh.write(struct.pack(f"<{dim}f", *vec.astype(np.float32)))
            fh.write(b"\n")


def load_word_vectors_text(path, expected_dim=None):
    """Read the headerless text format (word then decimals per line)."""
    path = Path(path)
    vectors = {}
    dim = expected_dim
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise EmbeddingFormatError(f"{path}:{lineno}: no vector values")
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            vectors[word] = np.array([float(v) for v in values], dtype=np.float64)
    if not vectors:
        raise EmbeddingFormatError(f"{path}: no vectors found")
    return WordVectorStore(vectors, dim)


def load_word_vectors(path, fmt="auto", expected_dim=None):
    """Load either format; ``auto`` sniffs for the two-integer binary header."""
    if fmt == "binary":
        return load_word2vec_binary(path, expected_dim)
    if fmt == "text":
        return load_word_vectors_text(path, expected_dim)
    if fmt != "auto":
        raise ValueError(f"unknown format {fmt!r}; expected binary, text, or auto")
    with Path(path).open("rb") as fh:
        head = fh.readline(128).split()
    if len(head) == 2:
        try:
            int(head[0]), int(head[1])
            return load_word2vec_binary(path, expected_dim)
        except ValueError:
            pass
    return load_word_vectors_text(path, expected_dim)


def oov_vector(token, dim, scale=OOV_SCALE):
    """Deterministic pseudo-random vector for a token outside the store.

    Seeded by a stable hash of the token so the same token maps to the same
    vector in every run and process.
    """
    seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=dim)


def coverage(vocab, store):
    """Fraction of vocabulary tokens present in the store."""
    tokens = vocab.tokens_by_id()
    if not tokens:
        return 0.0
    return sum(1 for t in tokens if t in store) / len(tokens)


def build_embedding_matrix(vocab, store=None, dim=300):
    """Assemble the ``[vocab_size, dim]`` float64 matrix for a vocabulary.

    Row 0 (padding) is zero. Tokens found in the store copy their pretrained
    vector; everything else (including the unknown token, and every token in
    fallback mode when ``store`` is None) gets a hash-seeded random vector.
    The store coverage is logged as data, not asserted.
    """
    if store is not None and store.dim != dim:
        raise EmbeddingFormatError(f"store dimension {store.dim} does not match requested {dim}")
    matrix = np.zeros((len(vocab), dim), dtype=np.float64)
    matrix[UNK_ID] = oov_vector(UNK_TOKEN, dim)
    hits = 0
    for token in vocab.tokens_by_id():
        idx = vocab.id_for(token)
        if store is not None and token in store:
            matrix[idx] = store.get(token)
            hits += 1
        else:
            matrix[idx] = oov_vector(token, dim)
    total = max(len(vocab) - 2, 1)
    if store is not None:
        log.info("embedding coverage: %d/%d tokens (%.1f%%)",
                 hits, total, 100.0 * hits / total)
    else:
        log.info("no pretrained store: %d tokens use hash-seeded vectors", total)
    return matrix
