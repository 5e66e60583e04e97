"""Distant supervision for ascertainment sentences.

Every sentence in a document is scored by cosine similarity against the
document's manually extracted ascertainment snippets; the top three
sentences per document become pseudo-positives, everything else negative.
Test data is never distantly labeled: it comes from a direct-annotation
source and is kept document-disjoint from train/val.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .documents import Corpus, Sentence, segment_and_tokenize, tokenize
from .metrics import split_by_document
from .riskdb import RiskRecord, snippets_by_pmid
from .vectors import EmbeddingTable, SentenceVector, VocabStats, represent

LABELS = ("positive", "negative")
PROVENANCES = ("distant", "direct")


class UndefinedCosineError(ValueError):
    """Cosine similarity is undefined for a zero vector."""


class LabelingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LabeledSentence:
    pmid: str
    sent_id: int
    text: str
    label: str
    score: float
    matched_snippet_idx: int | None = None
    provenance: str = "distant"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if (self.label == "positive" and self.provenance == "distant"
                and self.matched_snippet_idx is None):
            raise ValueError("distant positive must carry matched_snippet_idx")


@dataclass
class AscertainmentDataset:
    train: list[LabeledSentence]
    val: list[LabeledSentence]
    test: list[LabeledSentence]
    repr_mode: str

    def __post_init__(self):
        pmid_sets = [
            {s.pmid for s in split} for split in (self.train, self.val, self.test)
        ]
        for i in range(len(pmid_sets)):
            for j in range(i + 1, len(pmid_sets)):
                overlap = pmid_sets[i] & pmid_sets[j]
                if overlap:
                    raise ValueError(f"pmid overlap across splits: {sorted(overlap)}")
        for s in self.test:
            if s.provenance != "direct":
                raise ValueError(f"test sentence {s.pmid}/{s.sent_id} is not directly labeled")

    def splits(self) -> dict[str, list[LabeledSentence]]:
        return {"train": self.train, "val": self.val, "test": self.test}


def _values(v) -> np.ndarray:
    return v.values if isinstance(v, SentenceVector) else np.asarray(v, dtype=np.float64)


def cosine(u, v) -> float:
    """u.v / (||u|| ||v||); raises on zero vectors rather than returning 0."""
    a, b = _values(u), _values(v)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise UndefinedCosineError("cosine undefined for zero vector")
    value = float(np.dot(a, b) / (na * nb))
    return max(-1.0, min(1.0, value))


def label_document(sentences: list[Sentence], sent_vecs, snippet_vecs,
                   k: int = 3) -> list[LabeledSentence]:
    """Top-k-by-similarity pseudo-labels for one document.

    Per-sentence score is the max cosine over the document's snippets; ties
    at the k-th rank break toward the lower sent_id.  Fewer than k sentences
    means everything is positive (with a warning).
    """
    if not sentences or len(sentences) != len(sent_vecs):
        raise ValueError("sentences and vectors must align and be non-empty")
    if not snippet_vecs:
        raise ValueError("need at least one snippet vector")

    usable_snippets = []
    for idx, vec in enumerate(snippet_vecs):
        if np.linalg.norm(_values(vec)) == 0.0:
            warnings.warn(f"snippet {idx} has a zero vector; skipped", LabelingWarning)
            continue
        usable_snippets.append((idx, vec))
    if not usable_snippets:
        raise UndefinedCosineError("all snippet vectors are zero")

    scored = []
    for sent, vec in zip(sentences, sent_vecs):
        if np.linalg.norm(_values(vec)) == 0.0:
            warnings.warn(f"sentence {sent.pmid}/{sent.sent_id} has a zero vector; "
                          "ranked last", LabelingWarning)
            scored.append((sent, -1.0, usable_snippets[0][0]))
            continue
        best_score, best_idx = -math.inf, None
        for idx, svec in usable_snippets:
            value = cosine(vec, svec)
            if value > best_score:
                best_score, best_idx = value, idx
        scored.append((sent, best_score, best_idx))

    if len(scored) < k:
        warnings.warn(f"document {sentences[0].pmid} has {len(scored)} sentences "
                      f"(< k={k}); all labeled positive", LabelingWarning)
    ranked = sorted(range(len(scored)), key=lambda i: (-scored[i][1], scored[i][0].sent_id))
    positive_set = set(ranked[:k])

    out = []
    for i, (sent, score, snippet_idx) in enumerate(scored):
        positive = i in positive_set
        out.append(LabeledSentence(
            pmid=sent.pmid, sent_id=sent.sent_id, text=sent.text,
            label="positive" if positive else "negative",
            score=score, matched_snippet_idx=snippet_idx, provenance="distant"))
    return out


@dataclass
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 42


def featurize_document(doc, mode: str, table: EmbeddingTable | None = None,
                       stats: VocabStats | None = None, encoder=None):
    sentences, vecs = [], []
    for sent, tokens in segment_and_tokenize(doc):
        sentences.append(sent)
        vecs.append(represent(tokens, mode, table=table, stats=stats,
                              encoder=encoder, raw_text=sent.text))
    return sentences, vecs


def featurize_snippets(snippets: list[str], mode: str,
                       table: EmbeddingTable | None = None,
                       stats: VocabStats | None = None, encoder=None):
    return [represent(tokenize(s), mode, table=table, stats=stats,
                      encoder=encoder, raw_text=s) for s in snippets]


def build_ascertainment_dataset(corpus: Corpus, records: list[RiskRecord],
                                repr_mode: str, split_spec: SplitSpec,
                                table: EmbeddingTable | None = None,
                                stats: VocabStats | None = None,
                                encoder=None,
                                direct_labels: dict[str, set[int]] | None = None,
                                k: int = 3) -> AscertainmentDataset:
    """Distantly label train/val documents; read test labels directly.

    ``direct_labels`` maps pmid -> set of positive sent_ids for documents in
    the test split (all their other sentences are negative).  ROD pmids
    absent from the corpus are reported with a warning; corpus documents
    without snippets cannot be distantly labeled and are skipped in
    train/val.
    """
    snippets = snippets_by_pmid(records)
    missing = sorted(set(snippets) - set(corpus.pmids()))
    if missing:
        warnings.warn(f"ROD pmids missing from corpus: {missing}", LabelingWarning)

    train_pmids, val_pmids, test_pmids = split_by_document(
        corpus.pmids(), split_spec.ratios, split_spec.seed)

    def distant(pmids: list[str]) -> list[LabeledSentence]:
        out = []
        for pmid in pmids:
            doc_snips = snippets.get(pmid)
            if not doc_snips:
                warnings.warn(f"document {pmid} has no ascertainment snippets; skipped",
                              LabelingWarning)
                continue
            sentences, vecs = featurize_document(corpus.get(pmid), repr_mode,
                                                 table=table, stats=stats, encoder=encoder)
            if not sentences:
                continue
            snip_vecs = featurize_snippets(doc_snips, repr_mode, table=table,
                                           stats=stats, encoder=encoder)
            out.extend(label_document(sentences, vecs, snip_vecs, k=k))
        return out

    direct_labels = direct_labels or {}
    test: list[LabeledSentence] = []
    for pmid in test_pmids:
        if pmid not in direct_labels:
            warnings.warn(f"test document {pmid} has no direct annotations; skipped",
                          LabelingWarning)
            continue
        positives = direct_labels[pmid]
        sentences = [sent for sent, _ in segment_and_tokenize(corpus.get(pmid))]
        for sent in sentences:
            positive = sent.sent_id in positives
            test.append(LabeledSentence(
                pmid=sent.pmid, sent_id=sent.sent_id, text=sent.text,
                label="positive" if positive else "negative",
                score=1.0 if positive else 0.0,
                matched_snippet_idx=None, provenance="direct"))

    return AscertainmentDataset(train=distant(train_pmids), val=distant(val_pmids),
                                test=test, repr_mode=repr_mode)


# ---------------------------------------------------------------------------
# JSONL wire format
# ---------------------------------------------------------------------------

def labeled_to_jsonl_line(sentence: LabeledSentence, repr_mode: str) -> str:
    return json.dumps({
        "pmid": sentence.pmid,
        "sent_id": sentence.sent_id,
        "text": sentence.text,
        "label": sentence.label,
        "score": sentence.score,
        "provenance": sentence.provenance,
        "repr_mode": repr_mode,
    }, ensure_ascii=False)


def write_labeled_jsonl(path, sentences: list[LabeledSentence], repr_mode: str):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            fh.write(labeled_to_jsonl_line(sentence, repr_mode) + "\n")
    return path


def read_labeled_jsonl(path) -> list[LabeledSentence]:
    """Read the wire format back.  The snippet index is in-memory bookkeeping
    outside the schema, so distant positives reload with a placeholder 0."""
    out = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(LabeledSentence(
                pmid=rec["pmid"], sent_id=rec["sent_id"], text=rec["text"],
                label=rec["label"], score=rec["score"],
                matched_snippet_idx=rec.get("matched_snippet_idx", 0),
                provenance=rec["provenance"]))
    return out
