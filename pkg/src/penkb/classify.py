"""Ascertainment sentence classifiers.

Two families share one scoring contract (a positive-class probability per
sentence): linear baselines (hinge-loss SVM, logistic regression) over
fixed sentence vectors, and a fine-tuned contextual encoder with a 2-way
classification head on the sequence summary vector.  Linear models are
plain weight/bias records scored in numpy; sklearn solvers fit them, which
keeps training bit-reproducible under a fixed seed and single thread.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .encoders import TinyEncoder
from .metrics import compute_metrics
from .vectors import EmbeddingTable, VocabStats, represent
from .weak_labels import LabeledSentence

LINEAR_KINDS = ("svm_hinge", "logistic")
CLASSIFIER_KINDS = LINEAR_KINDS + ("encoder",)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class LinearModel:
    kind: str
    weights: np.ndarray
    bias: float
    repr_mode: str
    # probability = sigmoid(a * score + c); identity for logistic, Platt fit
    # on held-out data for the SVM.
    calibration: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if self.kind not in LINEAR_KINDS:
            raise ValueError(f"unknown linear kind {self.kind!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("non-finite linear model parameters")

    def decision_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.weights.shape[0]:
            raise ValueError(f"feature dim {X.shape} does not match weights "
                             f"{self.weights.shape}")
        return X @ self.weights + self.bias

    def positive_probs(self, X) -> np.ndarray:
        a, c = self.calibration
        return _sigmoid(a * self.decision_scores(X) + c)


class EncoderClassifier(nn.Module):
    """Trainable encoder + affine 2-class head over the summary vector."""

    def __init__(self, encoder: TinyEncoder):
        super().__init__()
        self.encoder = encoder
        with torch.random.fork_rng():
            torch.manual_seed(encoder.config.seed + 7)
            self.head = nn.Linear(encoder.cls_dim, 2)

    def logits_for_texts(self, texts: list[str]) -> torch.Tensor:
        from .documents import tokenize

        encodings = [self.encoder.encode_words([t.token for t in tokenize(text)])
                     for text in texts]
        hidden, _ = self.encoder.run_batch(encodings)
        return self.head(hidden[:, 0])

    @torch.no_grad()
    def positive_probs(self, texts: list[str]) -> np.ndarray:
        was_training = self.training
        self.eval()
        probs = F.softmax(self.logits_for_texts(texts), dim=-1)[:, 1]
        if was_training:
            self.train()
        return probs.detach().cpu().numpy().astype(np.float64)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.encoder.save(directory)
        torch.save(self.head.state_dict(), directory / "classifier_head.pt")

    @classmethod
    def load(cls, directory) -> "EncoderClassifier":
        directory = Path(directory)
        encoder = TinyEncoder.load(directory, mode="trainable")
        model = cls(encoder)
        model.head.load_state_dict(torch.load(directory / "classifier_head.pt",
                                              weights_only=True))
        model.eval()
        return model


@dataclass
class ClassifierTrainConfig:
    lr: float = 2e-5
    batch_size: int = 32
    epochs: int = 4
    seed: int = 0
    C: float = 1.0
    class_weight: str | None = None  # sklearn-style, e.g. "balanced"


def featurize_labeled(sentences: list[LabeledSentence], mode: str,
                      table: EmbeddingTable | None = None,
                      stats: VocabStats | None = None,
                      encoder=None) -> tuple[np.ndarray, np.ndarray]:
    """Sentence matrix [n, d] and binary labels for a labeled split."""
    from .documents import tokenize

    X, y = [], []
    for sent in sentences:
        vec = represent(tokenize(sent.text), mode, table=table, stats=stats,
                        encoder=encoder, raw_text=sent.text)
        X.append(vec.values)
        y.append(1 if sent.label == "positive" else 0)
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)


def _labels(sentences: list[LabeledSentence]) -> np.ndarray:
    return np.asarray([1 if s.label == "positive" else 0 for s in sentences])


def _fit_platt(scores: np.ndarray, y: np.ndarray, seed: int) -> tuple[float, float]:
    from sklearn.linear_model import LogisticRegression

    if len(set(y.tolist())) < 2:
        return (1.0, 0.0)
    lr = LogisticRegression(random_state=seed, max_iter=1000)
    lr.fit(scores.reshape(-1, 1), y)
    return (float(lr.coef_[0, 0]), float(lr.intercept_[0]))


def train_linear(train_X, train_y, val_X, val_y, kind: str, repr_mode: str,
                 config: ClassifierTrainConfig) -> tuple[LinearModel, list[dict]]:
    from sklearn.linear_model import LogisticRegression
    from sklearn.svm import LinearSVC

    if len(set(train_y.tolist())) < 2:
        raise ValueError("training split needs both classes")
    if kind == "logistic":
        clf = LogisticRegression(C=config.C, random_state=config.seed,
                                 class_weight=config.class_weight, max_iter=1000)
        clf.fit(train_X, train_y)
        model = LinearModel(kind=kind, weights=clf.coef_[0],
                            bias=float(clf.intercept_[0]), repr_mode=repr_mode)
    elif kind == "svm_hinge":
        clf = LinearSVC(C=config.C, random_state=config.seed,
                        class_weight=config.class_weight, max_iter=10000)
        clf.fit(train_X, train_y)
        model = LinearModel(kind=kind, weights=clf.coef_[0],
                            bias=float(clf.intercept_[0]), repr_mode=repr_mode)
        # Calibrate on held-out data when available, else on train scores.
        cal_X, cal_y = (val_X, val_y) if len(val_y) else (train_X, train_y)
        model.calibration = _fit_platt(model.decision_scores(cal_X), cal_y, config.seed)
    else:
        raise ValueError(f"unknown linear kind {kind!r}")

    train_probs = model.positive_probs(train_X)
    train_loss = float(np.mean(-(train_y * np.log(np.clip(train_probs, 1e-12, 1))
                                 + (1 - train_y) * np.log(np.clip(1 - train_probs, 1e-12, 1)))))
    if not math.isfinite(train_loss):
        raise FloatingPointError("divergent training loss")
    entry = {"epoch": 0, "loss": train_loss}
    if len(val_y):
        val_report = compute_metrics(model.positive_probs(val_X) >= 0.5, val_y)
        entry.update({"val_f1": val_report.f1, "val_acc": val_report.acc})
    return model, [entry]


def train_encoder_classifier(train_sents: list[LabeledSentence],
                             val_sents: list[LabeledSentence],
                             encoder: TinyEncoder,
                             config: ClassifierTrainConfig
                             ) -> tuple[EncoderClassifier, list[dict]]:
    """Cross-entropy fine-tuning; keeps the best-val-F1 checkpoint."""
    torch.manual_seed(config.seed)
    model = EncoderClassifier(encoder)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    texts = [s.text for s in train_sents]
    targets = torch.tensor(_labels(train_sents), dtype=torch.long)
    val_texts = [s.text for s in val_sents]
    val_y = _labels(val_sents) if val_sents else _labels(train_sents)
    if not val_sents:
        val_texts = texts

    rng = random.Random(config.seed)
    order = list(range(len(texts)))
    log: list[dict] = []
    best_state, best_f1 = None, -math.inf
    for epoch in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in range(0, len(order), config.batch_size):
            idx = order[i:i + config.batch_size]
            optimizer.zero_grad()
            logits = model.logits_for_texts([texts[j] for j in idx])
            loss = F.cross_entropy(logits, targets[idx], reduction="mean")
            if not torch.isfinite(loss):
                raise FloatingPointError(f"divergent loss at epoch {epoch}, batch {i}")
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(idx)
        preds = model.positive_probs(val_texts) >= 0.5
        report = compute_metrics(preds, val_y)
        val_f1 = 0.0 if math.isnan(report.f1) else report.f1
        log.append({"epoch": epoch, "loss": epoch_loss, "val_f1": report.f1,
                    "val_acc": report.acc})
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_state = copy.deepcopy(model.state_dict())
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return model, log


def train_classifier(dataset, kind: str, config: ClassifierTrainConfig,
                     table: EmbeddingTable | None = None,
                     stats: VocabStats | None = None,
                     encoder=None):
    """Train one classifier on an AscertainmentDataset.

    Linear kinds featurize sentences with the dataset's representation mode;
    the encoder kind fine-tunes a trainable TinyEncoder on raw text.
    Returns (model, training_log).
    """
    if not dataset.train:
        raise ValueError("empty training split")
    if kind == "encoder":
        if not isinstance(encoder, TinyEncoder):
            raise ValueError("encoder kind requires a trainable TinyEncoder")
        return train_encoder_classifier(dataset.train, dataset.val, encoder, config)
    if kind not in LINEAR_KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    train_X, train_y = featurize_labeled(dataset.train, dataset.repr_mode,
                                         table=table, stats=stats, encoder=encoder)
    if dataset.val:
        val_X, val_y = featurize_labeled(dataset.val, dataset.repr_mode,
                                         table=table, stats=stats, encoder=encoder)
    else:
        val_X = np.empty((0, train_X.shape[1]))
        val_y = np.empty((0,), dtype=np.int64)
    return train_linear(train_X, train_y, val_X, val_y, kind,
                        dataset.repr_mode, config)


def predict_scores(model, inputs) -> list[float]:
    """Positive-class probabilities.

    Linear models take a vector batch; the encoder classifier takes raw
    sentence texts.  Deterministic in eval mode.
    """
    if isinstance(model, LinearModel):
        return [float(p) for p in model.positive_probs(np.asarray(inputs))]
    if isinstance(model, EncoderClassifier):
        return [float(p) for p in model.positive_probs(list(inputs))]
    raise TypeError(f"unsupported model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def data_fingerprint(sentences: list[LabeledSentence]) -> str:
    digest = hashlib.sha256()
    for s in sentences:
        digest.update(f"{s.pmid}\t{s.sent_id}\t{s.label}\t{s.text}\n".encode("utf-8"))
    return digest.hexdigest()[:16]


def save_checkpoint(model, directory, config: dict, data_hash: str,
                    metrics: dict, training_log: list[dict]):
    """Persist a model under {model_kind}/{run_id}/ with metadata JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(model, LinearModel):
        np.savez(directory / "linear.npz", weights=model.weights,
                 bias=np.array([model.bias]),
                 calibration=np.array(model.calibration))
        extra = {"kind": model.kind, "repr_mode": model.repr_mode}
    elif isinstance(model, EncoderClassifier):
        model.save(directory)
        extra = {"kind": "encoder"}
    else:
        model.save(directory)
        extra = {"kind": type(model).__name__}
    metadata = {"config": config, "data_hash": data_hash, "metrics": metrics,
                "training_log": training_log, **extra}
    (directory / "metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True), encoding="utf-8")
    return directory


def load_linear_checkpoint(directory) -> LinearModel:
    directory = Path(directory)
    meta = json.loads((directory / "metadata.json").read_text(encoding="utf-8"))
    blob = np.load(directory / "linear.npz")
    return LinearModel(kind=meta["kind"], weights=blob["weights"],
                       bias=float(blob["bias"][0]), repr_mode=meta["repr_mode"],
                       calibration=(float(blob["calibration"][0]),
                                    float(blob["calibration"][1])))
