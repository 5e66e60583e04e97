"""Sentence representations against arbitrary-precision oracles."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penkb.documents import Corpus, Document, Section, tokenize
from penkb.encoders import EncoderConfig, SubwordVocab, TinyEncoder
from penkb.vectors import (EmbeddingTable, SentenceVector, VocabStats,
                           ZeroVectorWarning, fit_vocab_stats, represent)

mpmath.mp.dps = 50


def _corpus_with_tokens(token_lists):
    docs = [Document(pmid=str(i), source_format="text",
                     sections=(Section("body", " ".join(tokens) + "."),))
            for i, tokens in enumerate(token_lists)]
    return Corpus(documents=docs)


def test_idf_token_in_all_docs_is_zero():
    corpus = _corpus_with_tokens([["shared", f"only{i}"] for i in range(4)])
    stats = fit_vocab_stats(corpus)
    assert stats.idf("shared") == pytest.approx(0.0, abs=1e-12)


def test_idf_token_in_one_of_four_docs():
    corpus = _corpus_with_tokens([["shared", f"only{i}"] for i in range(4)])
    stats = fit_vocab_stats(corpus)
    expected = float(mpmath.log(4))  # 1.3862943611...
    assert stats.idf("only2") == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.3863, abs=5e-5)


def test_idf_unseen_token():
    corpus = _corpus_with_tokens([["shared", f"only{i}"] for i in range(4)])
    stats = fit_vocab_stats(corpus)
    expected = float(mpmath.log(5))  # 1.6094379124...
    assert stats.idf("nevers") == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.6094, abs=5e-5)


def test_fit_vocab_stats_rejects_empty_corpus():
    with pytest.raises(ValueError):
        fit_vocab_stats(Corpus(documents=[]))


def test_vocab_stats_invariant():
    with pytest.raises(ValueError):
        VocabStats(doc_freq={"a": 5}, n_docs=4)


def _table(vectors):
    dim = len(next(iter(vectors.values())))
    return EmbeddingTable(dim=dim, lookup={k: np.array(v, dtype=float)
                                           for k, v in vectors.items()})


def test_bow_mean_of_two_tokens():
    table = _table({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    vec = represent(tokenize("a b"), "bow", table=table)
    assert vec.values == pytest.approx([0.5, 0.5])
    assert vec.mode == "bow" and vec.dim == 2


def test_tfidf_weighted_mean_oracle():
    # weights 3 and 1 -> (3*[1,0] + 1*[0,1]) / 4 = [0.75, 0.25]
    table = _table({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    stats = VocabStats(doc_freq={"a": 1, "b": 2}, n_docs=4)
    w_a, w_b = math.log(4 / 1), math.log(4 / 2)
    tokens = tokenize("a b")
    vec = represent(tokens, "tfidf", table=table, stats=stats)
    oracle = (w_a * np.array([1.0, 0.0]) + w_b * np.array([0.0, 1.0])) / (w_a + w_b)
    assert vec.values == pytest.approx(oracle)
    # fixed weights 3 and 1 give the 3:1 weighted mean
    stats31 = VocabStats(doc_freq={"a": 1, "b": 1}, n_docs=2)

    class FixedStats:
        def idf(self, token):
            return {"a": 3.0, "b": 1.0}[token]

    vec31 = represent(tokens, "tfidf", table=table, stats=FixedStats())
    assert vec31.values == pytest.approx([0.75, 0.25])


def test_tf_counts_repeated_tokens():
    table = _table({"a": [2.0], "b": [0.0]})
    stats = VocabStats(doc_freq={"a": 1, "b": 1}, n_docs=3)
    vec = represent(tokenize("a a b"), "tfidf", table=table, stats=stats)
    # equal idf -> tf-weighted mean = instance mean = (2+2+0)/3
    assert vec.values == pytest.approx([4.0 / 3.0])


def test_zero_vector_warning_on_oov_sentence():
    table = _table({"known": [1.0, 1.0]})
    with pytest.warns(ZeroVectorWarning):
        vec = represent(tokenize("unknown words"), "bow", table=table)
    assert vec.values == pytest.approx([0.0, 0.0])


def test_mode_preconditions():
    table = _table({"a": [1.0]})
    with pytest.raises(ValueError):
        represent(tokenize("a"), "tfidf", table=table)  # stats missing
    with pytest.raises(ValueError):
        represent(tokenize("a"), "cls", table=table)  # encoder missing


@settings(max_examples=30)
@given(st.floats(min_value=0.1, max_value=10.0))
def test_bow_scale_equivariance(c):
    base = {"x": np.array([1.0, -2.0, 0.5]), "y": np.array([0.25, 4.0, -1.0])}
    table = EmbeddingTable(dim=3, lookup=base)
    scaled = EmbeddingTable(dim=3, lookup={k: c * v for k, v in base.items()})
    tokens = tokenize("x y x")
    a = represent(tokens, "bow", table=table).values
    b = represent(tokens, "bow", table=scaled).values
    assert b == pytest.approx(c * a, rel=1e-9)


def test_tfidf_with_uniform_idf_equals_bow():
    table = EmbeddingTable.hashed(dim=8, seed=3)

    class UniformStats:
        def idf(self, token):
            return 0.7

    tokens = tokenize("alpha beta alpha gamma")
    bow = represent(tokens, "bow", table=table).values
    tfidf = represent(tokens, "tfidf", table=table, stats=UniformStats()).values
    assert tfidf == pytest.approx(bow, rel=1e-12)


def test_hashed_table_deterministic():
    t1 = EmbeddingTable.hashed(dim=16, seed=5)
    t2 = EmbeddingTable.hashed(dim=16, seed=5)
    assert t1.vector("BRCA2") == pytest.approx(t2.vector("BRCA2"))
    t3 = EmbeddingTable.hashed(dim=16, seed=6)
    assert not np.allclose(t1.vector("BRCA2"), t3.vector("BRCA2"))


def test_embedding_file_round_trip(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("alpha 1.0 2.0 3.0\nbeta -1.0 0.5 0.25\n", encoding="utf-8")
    table = EmbeddingTable.from_text_file(path, dim=3)
    assert table.vector("alpha") == pytest.approx([1.0, 2.0, 3.0])
    assert table.vector("missing") is None


def test_embedding_file_wrong_dim(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("alpha 1.0 2.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        EmbeddingTable.from_text_file(path, dim=3)


def test_cls_mode_dimension_and_determinism():
    vocab = SubwordVocab.build(["cases", "were", "enrolled", "controls", "matched"])
    encoder = TinyEncoder(vocab, EncoderConfig(dim=32, seed=4), mode="frozen")
    vec1 = represent(tokenize("Cases were enrolled."), "cls", encoder=encoder,
                     raw_text="Cases were enrolled.")
    vec2 = represent(tokenize("Cases were enrolled."), "cls", encoder=encoder,
                     raw_text="Cases were enrolled.")
    assert vec1.dim == 32 and vec1.mode == "cls"
    assert vec1.values == pytest.approx(vec2.values)


def test_sentence_vector_rejects_non_finite():
    with pytest.raises(ValueError):
        SentenceVector(values=np.array([np.nan, 1.0]), mode="bow", dim=2)
