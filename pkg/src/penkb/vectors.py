"""Sentence representations: bag-of-words average, TF-IDF-weighted average,
and contextual CLS vectors.

Word vectors come either from a standard text-format file ("token v1 .. vN")
or from a seeded hashed table that derives a deterministic pseudo-random
vector per token; the hashed table keeps tests and the synthetic pipeline
free of large external files.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .documents import Corpus, segment_and_tokenize

REPR_MODES = ("bow", "tfidf", "cls")
DEFAULT_EMBEDDING_DIM = 300


class ZeroVectorWarning(UserWarning):
    """A sentence produced an all-zero representation (no usable tokens)."""


@dataclass(frozen=True)
class SentenceVector:
    values: np.ndarray
    mode: str
    dim: int

    def __post_init__(self):
        if self.mode not in REPR_MODES:
            raise ValueError(f"unknown repr mode {self.mode!r}")
        if self.values.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite entries in sentence vector")


def _hashed_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    return rng.standard_normal(dim)


@dataclass
class EmbeddingTable:
    dim: int = DEFAULT_EMBEDDING_DIM
    lookup: dict[str, np.ndarray] = field(default_factory=dict)
    oov_policy: str = "zeros"  # "zeros" | "hashed"
    hash_seed: int = 0

    def __post_init__(self):
        if self.oov_policy not in ("zeros", "hashed"):
            raise ValueError(f"unknown oov policy {self.oov_policy!r}")
        for token, vec in self.lookup.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {token!r} has wrong length")

    def vector(self, token: str) -> np.ndarray | None:
        """Token vector, or None when the token is out of vocabulary under
        the zeros policy (such tokens are excluded from averages)."""
        vec = self.lookup.get(token)
        if vec is not None:
            return vec
        if self.oov_policy == "hashed":
            return _hashed_vector(token, self.dim, self.hash_seed)
        return None

    @classmethod
    def hashed(cls, dim: int = DEFAULT_EMBEDDING_DIM, seed: int = 0) -> "EmbeddingTable":
        return cls(dim=dim, lookup={}, oov_policy="hashed", hash_seed=seed)

    @classmethod
    def from_text_file(cls, path, dim: int = DEFAULT_EMBEDDING_DIM,
                       oov_policy: str = "zeros") -> "EmbeddingTable":
        lookup = {}
        with open(Path(path), encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                token, values = parts[0], parts[1:]
                if len(values) != dim:
                    raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
                lookup[token] = np.array([float(v) for v in values], dtype=np.float64)
        return cls(dim=dim, lookup=lookup, oov_policy=oov_policy)


@dataclass
class VocabStats:
    doc_freq: dict[str, int]
    n_docs: int

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("n_docs must be >= 1")
        for token, df in self.doc_freq.items():
            if not (1 <= df <= self.n_docs):
                raise ValueError(f"doc_freq[{token!r}]={df} outside [1, {self.n_docs}]")

    def idf(self, token: str) -> float:
        """ln(n_docs / doc_freq); unseen tokens get ln(n_docs + 1)."""
        df = self.doc_freq.get(token)
        if df is None:
            return math.log(self.n_docs + 1)
        return math.log(self.n_docs / df)


def fit_vocab_stats(corpus: Corpus) -> VocabStats:
    """Document-level frequencies over all non-excluded section tokens."""
    if not corpus.documents:
        raise ValueError("cannot fit vocabulary statistics on an empty corpus")
    doc_freq: dict[str, int] = {}
    for doc in corpus.documents:
        seen: set[str] = set()
        for _, tokens in segment_and_tokenize(doc):
            seen.update(span.token for span in tokens)
        for token in seen:
            doc_freq[token] = doc_freq.get(token, 0) + 1
    return VocabStats(doc_freq=doc_freq, n_docs=len(corpus.documents))


def _zero(dim: int, mode: str, context: str) -> SentenceVector:
    warnings.warn(f"zero {mode} vector for sentence {context!r}", ZeroVectorWarning,
                  stacklevel=3)
    return SentenceVector(values=np.zeros(dim), mode=mode, dim=dim)


def represent(sentence_tokens, mode: str, table: EmbeddingTable | None = None,
              stats: VocabStats | None = None, encoder=None,
              raw_text: str = "") -> SentenceVector:
    """Build one sentence vector.

    bow: unweighted mean of token vectors.
    tfidf: sum(tf * idf * v) / sum(tf * idf) over distinct in-vocabulary tokens.
    cls: the contextual encoder's sequence-summary vector on the raw text.
    """
    if mode == "cls":
        if encoder is None:
            raise ValueError("cls mode requires an encoder")
        values = np.asarray(encoder.cls_vector(raw_text), dtype=np.float64)
        return SentenceVector(values=values, mode="cls", dim=values.shape[0])
    if table is None:
        raise ValueError(f"{mode} mode requires an embedding table")
    tokens = [span.token for span in sentence_tokens]
    context = raw_text or " ".join(tokens)

    if mode == "bow":
        vecs = [table.vector(t) for t in tokens]
        vecs = [v for v in vecs if v is not None]
        if not vecs:
            return _zero(table.dim, mode, context)
        return SentenceVector(values=np.mean(vecs, axis=0), mode="bow", dim=table.dim)

    if mode == "tfidf":
        if stats is None:
            raise ValueError("tfidf mode requires vocabulary statistics")
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        num = np.zeros(table.dim)
        den = 0.0
        for t, tf in counts.items():
            vec = table.vector(t)
            if vec is None:
                continue
            w = tf * stats.idf(t)
            num += w * vec
            den += w
        if den == 0.0:
            return _zero(table.dim, mode, context)
        return SentenceVector(values=num / den, mode="tfidf", dim=table.dim)

    raise ValueError(f"unknown repr mode {mode!r}")
