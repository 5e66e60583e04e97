"""Stage runner: ingest -> label -> train -> predict -> ablate.

Artifacts live under ``{workdir}/{run_id}/``; model checkpoints under
``{registry}/{model_kind}/{run_id}/``.  A stage whose upstream artifact is
missing fails fast naming the missing stage.  Re-running a stage with the
same config and inputs reproduces its outputs (labeling output is
byte-identical, which the acceptance suite checks).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import classify, extract, review, weak_labels
from .config import PipelineConfig
from .documents import Corpus, Document, Section, load_corpus, segment_and_tokenize
from .encoders import EncoderConfig, HFEncoder, TinyEncoder, vocab_from_corpus
from .metrics import compute_metrics, split_by_document
from .riskdb import load_rod
from .synthesize import generate_synthetic_corpus, planted_ascertainment_ids
from .vectors import EmbeddingTable, fit_vocab_stats

STAGES = ("ingest", "label", "train_asc", "train_er", "predict", "ablate")


class PipelineError(RuntimeError):
    pass


class MissingStageError(PipelineError):
    def __init__(self, needed: str, wanted_for: str):
        super().__init__(f"stage '{wanted_for}' requires '{needed}' artifacts; "
                         f"run stage '{needed}' first")
        self.needed = needed


@dataclass
class RunPaths:
    root: Path

    @property
    def metadata(self) -> Path:
        return self.root / "metadata.json"

    @property
    def corpus(self) -> Path:
        return self.root / "corpus.jsonl"

    @property
    def sentences(self) -> Path:
        return self.root / "sentences.jsonl"

    def labeled(self, split: str) -> Path:
        return self.root / "labeled" / f"{split}.jsonl"

    def er(self, split: str) -> Path:
        return self.root / "er" / f"{split}.jsonl"

    @property
    def predictions(self) -> Path:
        return self.root / "predictions.jsonl"

    @property
    def asc_scores(self) -> Path:
        return self.root / "ascertainment_scores.jsonl"

    @property
    def queue(self) -> Path:
        return self.root / "queue.jsonl"

    @property
    def ablation(self) -> Path:
        return self.root / "ablation.json"

    @property
    def decisions_log(self) -> Path:
        return self.root / "decisions.log.jsonl"

    @property
    def kb_csv(self) -> Path:
        return self.root / "kb.csv"

    def report(self, stage: str) -> Path:
        return self.root / "reports" / f"{stage}.json"


# ---------------------------------------------------------------------------
# Shared construction helpers
# ---------------------------------------------------------------------------

def load_sources(config: PipelineConfig):
    """(corpus, rod records, gold ER examples or None, direct labels or None)."""
    if config.data.synthetic is not None:
        corpus, records, er_examples = generate_synthetic_corpus(config.data.synthetic)
        direct = planted_ascertainment_ids(corpus, records)
        return corpus, records, er_examples, direct
    corpus = load_corpus(config.data.manifest)
    records, rod_errors = load_rod(config.data.rod)
    if rod_errors:
        for err in rod_errors:
            print(f"[rod] {err}")
    er_examples = None
    if config.data.er_annotations:
        er_examples = extract.read_er_jsonl(config.data.er_annotations)
    direct = None
    if config.data.direct_labels:
        raw = json.loads(Path(config.data.direct_labels).read_text(encoding="utf-8"))
        direct = {pmid: set(ids) for pmid, ids in raw.items()}
    return corpus, records, er_examples, direct


def build_featurizer(config: PipelineConfig, corpus: Corpus):
    """(embedding table, vocab stats, frozen sentence encoder) per repr mode."""
    mode = config.repr.mode
    table = stats = encoder = None
    if mode in ("bow", "tfidf"):
        if config.repr.embeddings:
            table = EmbeddingTable.from_text_file(config.repr.embeddings,
                                                  dim=config.repr.embedding_dim)
        else:
            table = EmbeddingTable.hashed(dim=config.repr.embedding_dim,
                                          seed=config.repr.hash_seed)
        if mode == "tfidf":
            stats = fit_vocab_stats(corpus)
    else:  # cls: base (pre-fine-tuning) encoder, frozen
        encoder = build_frozen_encoder(config, corpus)
    return table, stats, encoder


def build_frozen_encoder(config: PipelineConfig, corpus: Corpus):
    if config.encoder.kind == "hf":
        return HFEncoder(config.encoder.model, mode="frozen")
    vocab = vocab_from_corpus(corpus, min_word_freq=config.encoder.min_word_freq)
    return TinyEncoder(vocab, _encoder_config(config), mode="frozen")


def _encoder_config(config: PipelineConfig, seed_offset: int = 0) -> EncoderConfig:
    e = config.encoder
    return EncoderConfig(dim=e.dim, n_layers=e.layers, n_heads=e.heads,
                         max_len=e.max_len, seed=e.seed + seed_offset)


def trainable_encoder_factory(config: PipelineConfig, corpus: Corpus):
    vocab = vocab_from_corpus(corpus, min_word_freq=config.encoder.min_word_freq)

    def make(seed_offset: int = 0) -> TinyEncoder:
        return TinyEncoder(vocab, _encoder_config(config, seed_offset),
                           mode="trainable")

    return make


def asc_checkpoint_dir(config: PipelineConfig) -> Path:
    return config.registry_dir() / config.ascertainment.kind / config.resolved_run_id()


def er_checkpoint_dir(config: PipelineConfig) -> Path:
    return config.registry_dir() / f"er_{config.extraction.mode}" / config.resolved_run_id()


def _window_config(config: PipelineConfig) -> extract.WindowConfig:
    return extract.WindowConfig(length=config.extraction.window_length,
                                stride=config.extraction.window_stride)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def _stage_ingest(config: PipelineConfig, paths: RunPaths, state: dict):
    corpus, records, er_examples, direct = load_sources(config)
    state.update(corpus=corpus, records=records, er_examples=er_examples,
                 direct=direct)
    with open(paths.corpus, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write(json.dumps({
                "pmid": doc.pmid,
                "source_format": doc.source_format,
                "sections": [{"title": s.title, "text": s.text,
                              "excluded": s.excluded} for s in doc.sections],
            }, ensure_ascii=False) + "\n")
    with open(paths.sentences, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            for sent, tokens in segment_and_tokenize(doc):
                fh.write(json.dumps({
                    "pmid": sent.pmid, "sent_id": sent.sent_id,
                    "section": sent.section, "text": sent.text,
                    "tokens": [{"token": t.token, "start": t.start, "end": t.end,
                                "is_numeric": t.is_numeric} for t in tokens],
                }, ensure_ascii=False) + "\n")
    return {"corpus": str(paths.corpus), "sentences": str(paths.sentences),
            "documents": len(corpus.documents), "errors": corpus.errors}


def _load_corpus_artifact(paths: RunPaths) -> Corpus:
    if not paths.corpus.exists():
        raise MissingStageError("ingest", "label")
    documents = []
    with open(paths.corpus, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            documents.append(Document(
                pmid=rec["pmid"], source_format=rec["source_format"],
                sections=tuple(Section(s["title"], s["text"], s["excluded"])
                               for s in rec["sections"])))
    return Corpus(documents=documents)


def _require_state_corpus(config: PipelineConfig, paths: RunPaths, state: dict,
                          wanted_for: str) -> Corpus:
    if "corpus" in state:
        return state["corpus"]
    if not paths.corpus.exists():
        raise MissingStageError("ingest", wanted_for)
    corpus = _load_corpus_artifact(paths)
    _, records, er_examples, direct = load_sources(config)
    state.update(corpus=corpus, records=records, er_examples=er_examples,
                 direct=direct)
    return corpus


def _stage_label(config: PipelineConfig, paths: RunPaths, state: dict):
    corpus = _require_state_corpus(config, paths, state, "label")
    table, stats, encoder = build_featurizer(config, corpus)
    dataset = weak_labels.build_ascertainment_dataset(
        corpus, state["records"], config.repr.mode,
        weak_labels.SplitSpec(ratios=tuple(config.split.ratios),
                              seed=config.split.seed),
        table=table, stats=stats, encoder=encoder,
        direct_labels=state.get("direct"), k=config.labeling.k_top)
    state["dataset"] = dataset
    paths.labeled("train").parent.mkdir(parents=True, exist_ok=True)
    for split, sentences in dataset.splits().items():
        weak_labels.write_labeled_jsonl(paths.labeled(split), sentences,
                                        config.repr.mode)

    artifacts = {f"labeled_{k}": str(paths.labeled(k)) for k in ("train", "val", "test")}
    if state.get("er_examples") is not None:
        splits = split_by_document(corpus.pmids(), config.split.ratios,
                                   config.split.seed)
        by_split = {"train": set(splits[0]), "val": set(splits[1]),
                    "test": set(splits[2])}
        paths.er("train").parent.mkdir(parents=True, exist_ok=True)
        er_split: dict[str, list] = {k: [] for k in by_split}
        for example in state["er_examples"]:
            for name, pmids in by_split.items():
                if example.pmid in pmids:
                    er_split[name].append(example)
        for name, items in er_split.items():
            extract.write_er_jsonl(paths.er(name), items)
            artifacts[f"er_{name}"] = str(paths.er(name))
        state["er_split"] = er_split
    return artifacts


def _require_labeled(config, paths: RunPaths, state: dict, wanted_for: str):
    if "dataset" in state:
        return state["dataset"]
    if not paths.labeled("train").exists():
        raise MissingStageError("label", wanted_for)
    dataset = weak_labels.AscertainmentDataset(
        train=weak_labels.read_labeled_jsonl(paths.labeled("train")),
        val=weak_labels.read_labeled_jsonl(paths.labeled("val")),
        test=weak_labels.read_labeled_jsonl(paths.labeled("test")),
        repr_mode=config.repr.mode)
    state["dataset"] = dataset
    return dataset


def _require_er_split(config, paths: RunPaths, state: dict, wanted_for: str):
    if "er_split" in state:
        return state["er_split"]
    if not paths.er("train").exists():
        raise MissingStageError("label", wanted_for)
    er_split = {name: extract.read_er_jsonl(paths.er(name))
                for name in ("train", "val", "test")}
    state["er_split"] = er_split
    return er_split


def _stage_train_asc(config: PipelineConfig, paths: RunPaths, state: dict):
    corpus = _require_state_corpus(config, paths, state, "train_asc")
    dataset = _require_labeled(config, paths, state, "train_asc")
    table, stats, encoder = build_featurizer(config, corpus)
    a = config.ascertainment
    train_config = classify.ClassifierTrainConfig(
        lr=a.lr, batch_size=a.batch_size, epochs=a.epochs, seed=a.seed,
        C=a.C, class_weight=a.class_weight)
    trainable = None
    if a.kind == "encoder":
        trainable = trainable_encoder_factory(config, corpus)(0)
    model, log = classify.train_classifier(dataset, a.kind, train_config,
                                           table=table, stats=stats,
                                           encoder=trainable if a.kind == "encoder" else encoder)
    state["asc_model"] = model

    metrics = {}
    flags: list[str] = []
    if dataset.test:
        golds = [1 if s.label == "positive" else 0 for s in dataset.test]
        scores = _score_sentences(model, dataset.test, config, corpus)
        report = compute_metrics([s >= a.threshold for s in scores], golds)
        metrics = report.as_dict()
        flags = list(report.flags)
    directory = classify.save_checkpoint(
        model, asc_checkpoint_dir(config), config=config.to_dict(),
        data_hash=classify.data_fingerprint(dataset.train),
        metrics=metrics, training_log=log)
    _write_report(paths.report("train_asc"), task="ascertainment", split="test",
                  model=a.kind, metrics=metrics, flags=flags)
    return {"checkpoint": str(directory), "metrics": metrics}


def _score_sentences(model, sentences, config: PipelineConfig, corpus: Corpus):
    if isinstance(model, classify.EncoderClassifier):
        return classify.predict_scores(model, [s.text for s in sentences])
    table, stats, encoder = build_featurizer(config, corpus)
    X, _ = classify.featurize_labeled(sentences, config.repr.mode,
                                      table=table, stats=stats, encoder=encoder)
    return classify.predict_scores(model, X)


def _stage_train_er(config: PipelineConfig, paths: RunPaths, state: dict):
    corpus = _require_state_corpus(config, paths, state, "train_er")
    er_split = _require_er_split(config, paths, state, "train_er")
    e = config.extraction
    train_config = extract.ExtractorTrainConfig(
        lr=e.lr, batch_size=e.batch_size, epochs=e.epochs, seed=e.seed,
        schedule=e.schedule, window=_window_config(config),
        relation_threshold=e.relation_threshold)
    factory = trainable_encoder_factory(config, corpus)
    model, log = extract.train(er_split["train"], er_split["val"], e.mode,
                               train_config, factory)
    state["er_model"] = model

    test = er_split["test"] or er_split["train"]
    report = extract.evaluate_extractor(model, test, _window_config(config),
                                        e.relation_threshold)
    metrics = {"entity": report["entity"].as_dict(),
               "relation": report["relation"].as_dict()}
    directory = er_checkpoint_dir(config)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(model, extract.JointModel):
        model.save(directory)
    else:
        (directory / "NOTE").write_text(
            "disjoint checkpoints are kept in memory for this run only\n",
            encoding="utf-8")
    (directory / "metadata.json").write_text(json.dumps({
        "config": config.to_dict(), "metrics": metrics,
        "training_log": log, "kind": e.mode,
    }, indent=2, sort_keys=True), encoding="utf-8")
    _write_report(paths.report("train_er"), task="entity_relation",
                  split="test" if er_split["test"] else "train",
                  model=f"{e.mode}", metrics=metrics, flags=[])
    return {"checkpoint": str(directory), "metrics": metrics}


def _require_er_model(config: PipelineConfig, paths: RunPaths, state: dict,
                      wanted_for: str):
    if "er_model" in state:
        return state["er_model"]
    directory = er_checkpoint_dir(config)
    if not (directory / "heads.pt").exists():
        raise MissingStageError("train_er", wanted_for)
    model = extract.JointModel.load(directory)
    model.relation_threshold = config.extraction.relation_threshold
    state["er_model"] = model
    return model


def _stage_predict(config: PipelineConfig, paths: RunPaths, state: dict):
    corpus = _require_state_corpus(config, paths, state, "predict")
    model = _require_er_model(config, paths, state, "predict")
    asc_model = state.get("asc_model")
    if asc_model is None:
        directory = asc_checkpoint_dir(config)
        if (directory / "linear.npz").exists():
            asc_model = classify.load_linear_checkpoint(directory)
        elif (directory / "classifier_head.pt").exists():
            asc_model = classify.EncoderClassifier.load(directory)
    window_config = _window_config(config)
    threshold = config.extraction.relation_threshold

    items: list[review.ReviewItem] = []
    with open(paths.predictions, "w", encoding="utf-8") as pred_fh, \
            open(paths.asc_scores, "w", encoding="utf-8") as asc_fh:
        for doc in corpus.documents:
            pairs = segment_and_tokenize(doc)
            if not pairs:
                continue
            if asc_model is not None:
                labeled = [weak_labels.LabeledSentence(
                    pmid=doc.pmid, sent_id=s.sent_id, text=s.text,
                    label="negative", score=0.0) for s, _ in pairs]
                scores = _score_sentences(asc_model, labeled, config, corpus)
                for (sent, _), score in zip(pairs, scores):
                    asc_fh.write(json.dumps({
                        "pmid": doc.pmid, "sent_id": sent.sent_id,
                        "score": float(score),
                    }) + "\n")
                    if score >= config.ascertainment.threshold:
                        items.append(review.item_from_sentence(
                            doc.pmid, sent.sent_id, sent.text, float(score)))
            for sent, tokens in pairs:
                triples = extract.decode_triples(tokens, model, threshold,
                                                 window_config, pmid=doc.pmid,
                                                 sent_id=sent.sent_id)
                for triple in triples:
                    pred_fh.write(json.dumps(triple.as_dict(),
                                             ensure_ascii=False) + "\n")
                    if triple.polarity == "positive":
                        items.append(review.item_from_triple(triple.as_dict()))
    review.write_queue_items(paths.queue, items)
    return {"predictions": str(paths.predictions), "queue": str(paths.queue),
            "queued_items": len(items)}


def _stage_ablate(config: PipelineConfig, paths: RunPaths, state: dict):
    from .perturbations import ablation_report

    model = _require_er_model(config, paths, state, "ablate")
    er_split = _require_er_split(config, paths, state, "ablate")
    examples = er_split["test"] or er_split["train"]
    report = ablation_report(model, examples, _window_config(config),
                             config.extraction.relation_threshold,
                             rng_seed=config.extraction.seed)
    payload = {"task": "perturbation_ablation",
               "split": "test" if er_split["test"] else "train",
               "model": config.extraction.mode, "report": report}
    paths.ablation.write_text(json.dumps(payload, indent=2, sort_keys=True),
                              encoding="utf-8")
    return {"ablation": str(paths.ablation)}


def _write_report(path: Path, **payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


_STAGE_FNS = {
    "ingest": _stage_ingest,
    "label": _stage_label,
    "train_asc": _stage_train_asc,
    "train_er": _stage_train_er,
    "predict": _stage_predict,
    "ablate": _stage_ablate,
}


def run_pipeline(config: PipelineConfig, stages) -> dict:
    """Run the requested stages in canonical order; returns artifact map."""
    config.validate()
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise PipelineError(f"unknown stages {sorted(unknown)}")
    ordered = [s for s in STAGES if s in set(stages)]
    paths = RunPaths(config.run_dir())
    paths.root.mkdir(parents=True, exist_ok=True)

    state: dict = {}
    artifacts: dict = {}
    for stage in ordered:
        artifacts[stage] = _STAGE_FNS[stage](config, paths, state)

    paths.metadata.write_text(json.dumps({
        "run_id": config.resolved_run_id(),
        "created": datetime.now(timezone.utc).isoformat(),
        "stages": ordered,
        "config": config.to_dict(),
        "artifacts": artifacts,
    }, indent=2, sort_keys=True), encoding="utf-8")
    return artifacts
