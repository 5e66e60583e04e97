import time

import pytest
import torch

from penkb.documents import Corpus, Document, Section, segment_and_tokenize
from penkb.synthesize import (SyntheticSpec, generate_synthetic_corpus,
                              planted_ascertainment_ids)

torch.set_num_threads(1)

# Seed-fixed desk-scale corpus for the overfit criteria (~200 sentences).
OVERFIT_SPEC = SyntheticSpec(seed=202, n_docs=17, genes_per_doc=(2, 3),
                             estimate_range=(0.4, 25.0), negative_pair_rate=0.4)


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    docs = [
        Document(pmid="1001", source_format="text", sections=(
            Section("abstract", "We studied risk.", excluded=True),
            Section("body", "Cases were enrolled from the registry. "
                            "The odds ratio for carriers was 3.39. "
                            "Controls were matched on age."),
        )),
        Document(pmid="1002", source_format="text", sections=(
            Section("body", "Patients with breast cancer were eligible. "
                            "Follow-up lasted 12 years."),
        )),
        Document(pmid="1003", source_format="text", sections=(
            Section("body", "A hospital-based cohort was assembled. "
                            "The registry provided controls. "
                            "Risk was elevated for carriers."),
        )),
        Document(pmid="1004", source_format="text", sections=(
            Section("body", "Sequencing was performed on blood samples. "
                            "No association was observed."),
        )),
    ]
    return Corpus(documents=docs)


@pytest.fixture(scope="session")
def synthetic_bundle():
    spec = SyntheticSpec(seed=11, n_docs=8, genes_per_doc=(2, 3),
                         estimate_range=(0.4, 25.0), negative_pair_rate=0.4)
    return generate_synthetic_corpus(spec)


@pytest.fixture(scope="session")
def overfit_bundle():
    corpus, records, er_examples = generate_synthetic_corpus(OVERFIT_SPEC)
    n_sentences = sum(len(segment_and_tokenize(d)) for d in corpus.documents)
    return {"corpus": corpus, "records": records, "er_examples": er_examples,
            "planted": planted_ascertainment_ids(corpus, records),
            "n_sentences": n_sentences}


@pytest.fixture(scope="session")
def overfit_joint(overfit_bundle):
    """Joint extractor trained to fit the synthetic corpus; trained once."""
    from penkb.encoders import EncoderConfig, TinyEncoder, vocab_from_corpus
    from penkb.extract import ExtractorTrainConfig, WindowConfig, train_joint

    vocab = vocab_from_corpus(overfit_bundle["corpus"])
    encoder = TinyEncoder(vocab, EncoderConfig(dim=32, n_layers=2, n_heads=2,
                                               max_len=64, seed=5),
                          mode="trainable")
    config = ExtractorTrainConfig(lr=1e-3, batch_size=16, epochs=80, seed=5,
                                  schedule="constant",
                                  window=WindowConfig(12, 6),
                                  relation_threshold=0.5)
    start = time.perf_counter()
    model, log = train_joint(overfit_bundle["er_examples"], [], encoder, config)
    seconds = time.perf_counter() - start
    return {"model": model, "config": config, "log": log, "seconds": seconds,
            "examples": overfit_bundle["er_examples"]}


@pytest.fixture(scope="session")
def overfit_asc(overfit_bundle):
    """Tiny-encoder ascertainment classifier fit to the planted cues."""
    from penkb.classify import ClassifierTrainConfig, train_classifier
    from penkb.encoders import EncoderConfig, TinyEncoder, vocab_from_corpus
    from penkb.weak_labels import AscertainmentDataset, LabeledSentence

    corpus = overfit_bundle["corpus"]
    planted = overfit_bundle["planted"]
    train = []
    for doc in corpus.documents:
        for sent, _ in segment_and_tokenize(doc):
            positive = sent.sent_id in planted[doc.pmid]
            train.append(LabeledSentence(
                pmid=doc.pmid, sent_id=sent.sent_id, text=sent.text,
                label="positive" if positive else "negative",
                score=1.0 if positive else 0.0,
                matched_snippet_idx=0 if positive else None))
    dataset = AscertainmentDataset(train=train, val=[], test=[], repr_mode="bow")
    vocab = vocab_from_corpus(corpus)
    encoder = TinyEncoder(vocab, EncoderConfig(dim=32, n_layers=2, n_heads=2,
                                               max_len=64, seed=6),
                          mode="trainable")
    config = ClassifierTrainConfig(lr=1e-3, batch_size=32, epochs=40, seed=6)
    start = time.perf_counter()
    model, log = train_classifier(dataset, "encoder", config, encoder=encoder)
    seconds = time.perf_counter() - start
    return {"model": model, "dataset": dataset, "config": config, "log": log,
            "seconds": seconds}


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[acceptance] {outcome}: {name}")
