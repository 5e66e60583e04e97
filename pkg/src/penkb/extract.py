"""Joint entity tagging and relation classification over sentence windows.

Sentences are tiled with fixed-length token windows.  Within a window, each
word token gets a 3-way entity type from a softmax head over the sum of the
window summary (CLS) vector and the token representation.  Candidate
relation pairs are (germline-mutation, risk-estimate) entity pairs whose
spans fall inside one window with the mutation preceding the estimate in
token order; the pair score is a sigmoid over the elementwise product of
the CLS vector with the summed token representations spanning both
entities.  The training objective is the unweighted sum of the token-level
cross-entropy and the pairwise binary cross-entropy, with relation
candidates conditioned on gold entities.

A pipelined (disjoint) baseline trains the same tagger standalone, then a
relation classifier over ``[CLS] window [SEP] entity [SEP] entity [SEP]``
sequences that classifies from the contextual summary plus the entity
segment representations (window token outputs are discarded).
"""

from __future__ import annotations

import copy
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .documents import TokenSpan
from .encoders import EncoderConfig, SubwordVocab, TinyEncoder
from .metrics import MetricReport, set_prf

ENTITY_TYPES = ("none", "germline_mutation", "risk_estimate")
NONE, GENE, ESTIMATE = 0, 1, 2
POLARITIES = ("positive", "negative")


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntitySpan:
    start_tok: int
    end_tok: int  # exclusive
    type: str

    def __post_init__(self):
        if self.type not in ENTITY_TYPES[1:]:
            raise ValueError(f"unknown entity type {self.type!r}")
        if not (0 <= self.start_tok < self.end_tok):
            raise ValueError(f"bad entity span [{self.start_tok},{self.end_tok})")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start_tok, self.end_tok)


@dataclass(frozen=True)
class RelationPair:
    gene_idx: int
    estimate_idx: int
    polarity: str

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")


@dataclass
class ERExample:
    pmid: str
    sent_id: int
    text: str
    tokens: list[TokenSpan]
    entities: list[EntitySpan]
    relations: list[RelationPair]

    def __post_init__(self):
        n = len(self.tokens)
        taken = set()
        for ent in self.entities:
            if ent.end_tok > n:
                raise ValueError(f"entity span {ent.span} outside {n} tokens")
            overlap = taken & set(range(ent.start_tok, ent.end_tok))
            if overlap:
                raise ValueError(f"overlapping entity spans at tokens {sorted(overlap)}")
            taken.update(range(ent.start_tok, ent.end_tok))
        for rel in self.relations:
            gene = self.entities[rel.gene_idx]
            estimate = self.entities[rel.estimate_idx]
            if gene.type != "germline_mutation" or estimate.type != "risk_estimate":
                raise ValueError("relation must pair a germline_mutation with a risk_estimate")

    def token_labels(self) -> list[int]:
        labels = [NONE] * len(self.tokens)
        for ent in self.entities:
            type_id = ENTITY_TYPES.index(ent.type)
            for i in range(ent.start_tok, ent.end_tok):
                labels[i] = type_id
        return labels

    def words(self) -> list[str]:
        return [span.token for span in self.tokens]

    def gold_positive_pairs(self) -> set[tuple[tuple[int, int], tuple[int, int]]]:
        return {(self.entities[r.gene_idx].span, self.entities[r.estimate_idx].span)
                for r in self.relations if r.polarity == "positive"}

    def entity_set(self) -> set[tuple[int, int, str]]:
        return {(e.start_tok, e.end_tok, e.type) for e in self.entities}


@dataclass(frozen=True)
class SpanWindow:
    start_tok: int
    end_tok: int  # exclusive, clipped at sentence end

    @property
    def span(self) -> tuple[int, int]:
        return (self.start_tok, self.end_tok)


@dataclass(frozen=True)
class WindowConfig:
    length: int = 12
    stride: int = 6

    def __post_init__(self):
        if not (10 <= self.length <= 15):
            raise ValueError(f"window length {self.length} outside [10, 15]")
        if not (1 <= self.stride <= self.length):
            raise ValueError(f"stride {self.stride} outside [1, {self.length}]")


def enumerate_spans(n_tokens: int, config: WindowConfig) -> list[SpanWindow]:
    """Deterministic tiling; the final window is clipped at the sentence end."""
    if n_tokens <= 0:
        return []
    starts = [0]
    while starts[-1] + config.length < n_tokens:
        starts.append(starts[-1] + config.stride)
    return [SpanWindow(s, min(s + config.length, n_tokens)) for s in starts]


@dataclass(frozen=True)
class Triple:
    gene: str
    estimate: str
    polarity: str
    confidence: float
    pmid: str
    sent_id: int
    window: tuple[int, int]
    gene_span: tuple[int, int]
    estimate_span: tuple[int, int]

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0,1]")
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")

    def as_dict(self) -> dict:
        return {
            "pmid": self.pmid, "sent_id": self.sent_id, "gene": self.gene,
            "estimate": self.estimate, "polarity": self.polarity,
            "confidence": self.confidence, "window": list(self.window),
            "gene_span": list(self.gene_span), "estimate_span": list(self.estimate_span),
        }


# ---------------------------------------------------------------------------
# Candidate enumeration
# ---------------------------------------------------------------------------

def window_contains(window: SpanWindow, span: tuple[int, int]) -> bool:
    return window.start_tok <= span[0] and span[1] <= window.end_tok


def candidate_pairs(genes: list[tuple[int, int]], estimates: list[tuple[int, int]],
                    window: SpanWindow) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Ordered (gene, estimate) span pairs fully inside the window, with the
    gene preceding the estimate in token order."""
    pairs = []
    for g in genes:
        if not window_contains(window, g):
            continue
        for e in estimates:
            if not window_contains(window, e):
                continue
            if g[0] < e[0]:
                pairs.append((g, e))
    return pairs


def gold_spans_by_type(example: ERExample):
    genes = [e.span for e in example.entities if e.type == "germline_mutation"]
    estimates = [e.span for e in example.entities if e.type == "risk_estimate"]
    return genes, estimates


# ---------------------------------------------------------------------------
# Joint model
# ---------------------------------------------------------------------------

class JointModel(nn.Module):
    """Shared encoder with an entity head over (CLS + token) sums and a
    relation head over CLS x summed-span features."""

    def __init__(self, encoder: TinyEncoder, relation_threshold: float = 0.5):
        super().__init__()
        self.encoder = encoder
        dim = encoder.cls_dim
        with torch.random.fork_rng():
            torch.manual_seed(encoder.config.seed + 1)
            self.entity_head = nn.Linear(dim, len(ENTITY_TYPES))
            self.relation_head = nn.Linear(dim, 1)
        self.relation_threshold = relation_threshold

    # -- window-level computation ------------------------------------------

    def _window_states(self, words: list[str]):
        enc = self.encoder.encode_words(words)
        hidden, _ = self.encoder.run_batch([enc])
        hidden = hidden[0]
        cls = hidden[0]
        token_reps = hidden[torch.tensor(enc.word_positions, dtype=torch.long)]
        return cls, token_reps

    def window_entity_logits(self, words: list[str]) -> torch.Tensor:
        cls, token_reps = self._window_states(words)
        return self.entity_head(cls.unsqueeze(0) + token_reps)

    def window_entity_distributions(self, words: list[str]) -> torch.Tensor:
        return F.softmax(self.window_entity_logits(words), dim=-1)

    def window_pair_logit(self, words: list[str], x_rel: tuple[int, int],
                          y_rel: tuple[int, int]) -> torch.Tensor:
        cls, token_reps = self._window_states(words)
        return self._pair_logit_from_states(cls, token_reps, x_rel, y_rel)

    def _pair_logit_from_states(self, cls, token_reps, x_rel, y_rel) -> torch.Tensor:
        n = token_reps.shape[0]
        i = min(x_rel[0], y_rel[0])
        j = max(x_rel[1], y_rel[1])  # exclusive
        if i < 0 or j > n:
            raise ValueError(f"entity span outside window: [{i},{j}) vs {n} tokens")
        span_sum = token_reps[i:j].sum(dim=0)
        return self.relation_head(cls * span_sum).squeeze(-1)

    # -- decode protocol -----------------------------------------------------

    @torch.no_grad()
    def window_entity_types(self, words: list[str], window_start: int = 0) -> list[int]:
        was_training = self.training
        self.eval()
        probs = self.window_entity_distributions(words)
        # argmax takes the first max, so ties resolve by type priority
        # none > germline_mutation > risk_estimate (the id order).
        out = probs.argmax(dim=-1).tolist()
        if was_training:
            self.train()
        return out

    @torch.no_grad()
    def window_pair_score(self, words: list[str], window_start: int,
                          x_rel: tuple[int, int], y_rel: tuple[int, int]) -> float:
        was_training = self.training
        self.eval()
        score = torch.sigmoid(self.window_pair_logit(words, x_rel, y_rel)).item()
        if was_training:
            self.train()
        return score

    # -- persistence ---------------------------------------------------------

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.encoder.save(directory)
        torch.save({"entity_head": self.entity_head.state_dict(),
                    "relation_head": self.relation_head.state_dict()},
                   directory / "heads.pt")
        (directory / "joint_config.json").write_text(
            json.dumps({"relation_threshold": self.relation_threshold}), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "JointModel":
        directory = Path(directory)
        encoder = TinyEncoder.load(directory, mode="trainable")
        cfg = json.loads((directory / "joint_config.json").read_text(encoding="utf-8"))
        model = cls(encoder, relation_threshold=cfg["relation_threshold"])
        heads = torch.load(directory / "heads.pt", weights_only=True)
        model.entity_head.load_state_dict(heads["entity_head"])
        model.relation_head.load_state_dict(heads["relation_head"])
        model.eval()
        return model


def entity_distributions(words: list[str], model) -> np.ndarray:
    """Per-token 3-class probabilities for one window (rows sum to 1)."""
    with torch.no_grad():
        probs = model.window_entity_distributions(words)
    return probs.detach().cpu().numpy()


def relation_probability(words: list[str], x_rel: tuple[int, int],
                         y_rel: tuple[int, int], model) -> float:
    """Sigmoid pair score in (0, 1) for two in-window entity spans."""
    with torch.no_grad():
        logit = model.window_pair_logit(words, x_rel, y_rel)
    return torch.sigmoid(logit).item()


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def _rel(span: tuple[int, int], window: SpanWindow) -> tuple[int, int]:
    return (span[0] - window.start_tok, span[1] - window.start_tok)


def joint_loss(examples: list[ERExample], model: JointModel,
               window_config: WindowConfig | None = None) -> torch.Tensor:
    """Negative log-likelihood summed over both tasks and the batch.

    Entity term: token-level cross-entropy per window.  Relation term:
    binary cross-entropy over gold-entity candidate pairs per window, where
    gold positive-polarity pairs are 1 and everything else (explicit
    negatives and unlisted candidates) is 0.
    """
    window_config = window_config or WindowConfig()
    device = next(model.parameters()).device
    dtype = next(model.parameters()).dtype
    total = torch.zeros((), device=device, dtype=dtype)
    for example in examples:
        words = example.words()
        labels = example.token_labels()
        genes, estimates = gold_spans_by_type(example)
        positive = example.gold_positive_pairs()
        for window in enumerate_spans(len(words), window_config):
            w_words = words[window.start_tok:window.end_tok]
            cls, token_reps = model._window_states(w_words)
            logits = model.entity_head(cls.unsqueeze(0) + token_reps)
            w_labels = torch.tensor(labels[window.start_tok:window.end_tok],
                                    dtype=torch.long, device=device)
            entity_term = F.cross_entropy(logits, w_labels, reduction="sum")
            relation_term = torch.zeros((), device=device, dtype=dtype)
            for g, e in candidate_pairs(genes, estimates, window):
                logit = model._pair_logit_from_states(
                    cls, token_reps, _rel(g, window), _rel(e, window))
                target = torch.tensor(1.0 if (g, e) in positive else 0.0,
                                      device=device, dtype=dtype)
                relation_term = relation_term + F.binary_cross_entropy_with_logits(
                    logit, target, reduction="sum")
            total = total + entity_term + relation_term
        if not torch.isfinite(total):
            raise FloatingPointError(
                f"non-finite joint loss at example {example.pmid}/{example.sent_id}")
    return total


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def merge_type_spans(types: list[int]) -> list[tuple[int, int, int]]:
    """Contiguous same-type runs (excluding none) as (start, end, type_id)."""
    spans = []
    start = None
    current = NONE
    for i, t in enumerate(types):
        if t != current:
            if current != NONE and start is not None:
                spans.append((start, i, current))
            start = i
            current = t
    if current != NONE and start is not None:
        spans.append((start, len(types), current))
    return spans


def decode_triples(tokens: list[TokenSpan], model, threshold: float | None = None,
                   window_config: WindowConfig | None = None,
                   pmid: str = "", sent_id: int = 0) -> list[Triple]:
    """Window-wise decode with cross-window deduplication.

    Every candidate pair becomes a triple: positive polarity when the pair
    score reaches the threshold (confidence = score), negative otherwise
    (confidence = 1 - score).  Duplicates across overlapping windows keep
    the highest-confidence occurrence; confidence ties prefer positive
    polarity, then the earlier window.
    """
    window_config = window_config or WindowConfig()
    if threshold is None:
        threshold = getattr(model, "relation_threshold", 0.5)
    words = [span.token for span in tokens]
    best: dict[tuple, Triple] = {}
    for window in enumerate_spans(len(words), window_config):
        w_words = words[window.start_tok:window.end_tok]
        types = model.window_entity_types(w_words, window.start_tok)
        spans = merge_type_spans(types)
        genes = [(s + window.start_tok, e + window.start_tok)
                 for s, e, t in spans if t == GENE]
        estimates = [(s + window.start_tok, e + window.start_tok)
                     for s, e, t in spans if t == ESTIMATE]
        for g, e in candidate_pairs(genes, estimates, window):
            score = model.window_pair_score(w_words, window.start_tok,
                                            _rel(g, window), _rel(e, window))
            positive = score >= threshold
            triple = Triple(
                gene=" ".join(words[g[0]:g[1]]),
                estimate=" ".join(words[e[0]:e[1]]),
                polarity="positive" if positive else "negative",
                confidence=score if positive else 1.0 - score,
                pmid=pmid, sent_id=sent_id, window=window.span,
                gene_span=g, estimate_span=e)
            key = (g, e)
            held = best.get(key)
            if held is None or _triple_rank(triple) > _triple_rank(held):
                best[key] = triple
    return sorted(best.values(), key=lambda t: (t.gene_span, t.estimate_span))


def _triple_rank(t: Triple) -> tuple:
    return (t.confidence, 1 if t.polarity == "positive" else 0, -t.window[0])


# ---------------------------------------------------------------------------
# Training (joint and disjoint)
# ---------------------------------------------------------------------------

@dataclass
class ExtractorTrainConfig:
    lr: float = 5e-5
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    schedule: str = "linear"  # linear decay to 0, per the training recipe
    window: WindowConfig = field(default_factory=WindowConfig)
    relation_threshold: float = 0.5


def _make_scheduler(optimizer, config: ExtractorTrainConfig, total_steps: int):
    if config.schedule == "constant":
        return None
    if config.schedule == "linear":
        return torch.optim.lr_scheduler.LambdaLR(
            optimizer, lambda step: max(0.0, 1.0 - step / max(1, total_steps)))
    raise ValueError(f"unknown schedule {config.schedule!r}")


def predict_word_labels(tokens: list[TokenSpan], model,
                        window_config: WindowConfig | None = None) -> list[int]:
    """Per-word entity labels: probabilities averaged over covering windows,
    then argmax with the none-first tie rule.  Models without a probability
    surface (e.g. oracle stubs) contribute one-hot votes instead."""
    window_config = window_config or WindowConfig()
    words = [span.token for span in tokens]
    sums = np.zeros((len(words), len(ENTITY_TYPES)))
    counts = np.zeros(len(words))
    soft = hasattr(model, "window_entity_distributions")
    for window in enumerate_spans(len(words), window_config):
        w_words = words[window.start_tok:window.end_tok]
        if soft:
            probs = entity_distributions(w_words, model)
        else:
            types = model.window_entity_types(w_words, window.start_tok)
            probs = np.eye(len(ENTITY_TYPES))[types]
        sums[window.start_tok:window.end_tok] += probs
        counts[window.start_tok:window.end_tok] += 1
    means = sums / np.maximum(counts, 1)[:, None]
    return [int(np.argmax(row)) for row in means]


def evaluate_extractor(model, examples: list[ERExample],
                       window_config: WindowConfig | None = None,
                       threshold: float | None = None) -> dict[str, MetricReport]:
    """Micro entity-span and positive-relation metrics over a split."""
    window_config = window_config or WindowConfig()
    pred_entities, gold_entities = set(), set()
    pred_relations, gold_relations = set(), set()
    for ex in examples:
        key = (ex.pmid, ex.sent_id)
        labels = predict_word_labels(ex.tokens, model, window_config)
        for s, e, t in merge_type_spans(labels):
            pred_entities.add((key, s, e, ENTITY_TYPES[t]))
        for s, e, t in ex.entity_set():
            gold_entities.add((key, s, e, t))
        triples = decode_triples(ex.tokens, model, threshold=threshold,
                                 window_config=window_config,
                                 pmid=ex.pmid, sent_id=ex.sent_id)
        for t in triples:
            if t.polarity == "positive":
                pred_relations.add((key, t.gene_span, t.estimate_span))
        for pair in ex.gold_positive_pairs():
            gold_relations.add((key, pair[0], pair[1]))
    return {"entity": set_prf(pred_entities, gold_entities),
            "relation": set_prf(pred_relations, gold_relations)}


def evaluate_relations_with_gold_entities(model, examples: list[ERExample],
                                          window_config: WindowConfig | None = None,
                                          threshold: float | None = None) -> MetricReport:
    """Relation metrics with oracle gold entities fed to the relation stage.

    Candidates are the gold gene/estimate pairs that share a window, scored
    across windows keeping the max; metrics are computed only over those
    pairs, so the tagger plays no part.
    """
    window_config = window_config or WindowConfig()
    if threshold is None:
        threshold = getattr(model, "relation_threshold", 0.5)
    predicted, gold = set(), set()
    for ex in examples:
        words = ex.words()
        genes, estimates = gold_spans_by_type(ex)
        positive = ex.gold_positive_pairs()
        scored: dict[tuple, float] = {}
        for window in enumerate_spans(len(words), window_config):
            w_words = words[window.start_tok:window.end_tok]
            for g, e in candidate_pairs(genes, estimates, window):
                score = model.window_pair_score(w_words, window.start_tok,
                                                _rel(g, window), _rel(e, window))
                scored[(g, e)] = max(scored.get((g, e), 0.0), score)
        for (g, e), score in scored.items():
            key = ((ex.pmid, ex.sent_id), g, e)
            if score >= threshold:
                predicted.add(key)
            if (g, e) in positive:
                gold.add(key)
    return set_prf(predicted, gold)


def _val_score(report: dict[str, MetricReport]) -> float:
    parts = []
    for key in ("entity", "relation"):
        value = report[key].f1
        parts.append(0.0 if math.isnan(value) else value)
    return sum(parts) / len(parts)


def train_joint(train_examples: list[ERExample], val_examples: list[ERExample],
                encoder: TinyEncoder, config: ExtractorTrainConfig
                ) -> tuple[JointModel, list[dict]]:
    """Adam over the joint objective; returns the best-val checkpoint and a
    per-epoch training log."""
    torch.manual_seed(config.seed)
    model = JointModel(encoder, relation_threshold=config.relation_threshold)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    order = list(range(len(train_examples)))
    rng = random.Random(config.seed)
    steps_per_epoch = max(1, math.ceil(len(order) / config.batch_size))
    scheduler = _make_scheduler(optimizer, config, steps_per_epoch * config.epochs)

    log: list[dict] = []
    best_state, best_score = None, -math.inf
    for epoch in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in range(0, len(order), config.batch_size):
            batch = [train_examples[j] for j in order[i:i + config.batch_size]]
            optimizer.zero_grad()
            loss = joint_loss(batch, model, config.window)
            loss.backward()
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            epoch_loss += loss.item()
        report = evaluate_extractor(model, val_examples or train_examples,
                                    config.window, config.relation_threshold)
        score = _val_score(report)
        log.append({"epoch": epoch, "loss": epoch_loss,
                    "val_entity_f1": report["entity"].f1,
                    "val_relation_f1": report["relation"].f1})
        if score > best_score:
            best_score = score
            best_state = copy.deepcopy(model.state_dict())
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return model, log


# ---------------------------------------------------------------------------
# Disjoint baseline
# ---------------------------------------------------------------------------

class EntityTagger(nn.Module):
    """Standalone token tagger: dense layer over token representations."""

    def __init__(self, encoder: TinyEncoder):
        super().__init__()
        self.encoder = encoder
        with torch.random.fork_rng():
            torch.manual_seed(encoder.config.seed + 2)
            self.head = nn.Linear(encoder.cls_dim, len(ENTITY_TYPES))

    def window_entity_logits(self, words: list[str]) -> torch.Tensor:
        enc = self.encoder.encode_words(words)
        hidden, _ = self.encoder.run_batch([enc])
        token_reps = hidden[0][torch.tensor(enc.word_positions, dtype=torch.long)]
        return self.head(token_reps)

    def window_entity_distributions(self, words: list[str]) -> torch.Tensor:
        return F.softmax(self.window_entity_logits(words), dim=-1)

    @torch.no_grad()
    def window_entity_types(self, words: list[str], window_start: int = 0) -> list[int]:
        was_training = self.training
        self.eval()
        out = self.window_entity_distributions(words).argmax(dim=-1).tolist()
        if was_training:
            self.train()
        return out


class RelationClassifier(nn.Module):
    """Pipelined relation stage over boundary-marked inputs.

    The input sequence is [CLS] window-words [SEP] entity-x words [SEP]
    entity-y words [SEP].  Token outputs before the first separator (the
    window) are discarded; the classifier consumes the contextual summary
    concatenated with the mean-pooled entity segment representations.
    """

    def __init__(self, encoder: TinyEncoder):
        super().__init__()
        self.encoder = encoder
        dim = encoder.cls_dim
        with torch.random.fork_rng():
            torch.manual_seed(encoder.config.seed + 3)
            self.ffn = nn.Sequential(nn.Linear(3 * dim, dim), nn.GELU(),
                                     nn.Linear(dim, 1))

    def pair_logit(self, window_words: list[str], x_words: list[str],
                   y_words: list[str]) -> torch.Tensor:
        vocab = self.encoder.vocab
        ids = [vocab.cls_id]
        for word in window_words:
            ids.extend(vocab.encode_word(word))
        ids.append(vocab.sep_id)
        segments = []
        for ent_words in (x_words, y_words):
            seg_start = len(ids)
            for word in ent_words:
                ids.extend(vocab.encode_word(word))
            segments.append((seg_start, len(ids)))
            ids.append(vocab.sep_id)
        if len(ids) > self.encoder.config.max_len:
            raise ValueError(f"relation input of {len(ids)} pieces exceeds encoder limit "
                             f"{self.encoder.config.max_len}")
        device = next(self.parameters()).device
        hidden = self.encoder.forward(
            torch.tensor([ids], dtype=torch.long, device=device))[0]
        cls = hidden[0]
        pooled = [hidden[s:e].mean(dim=0) for s, e in segments]
        return self.ffn(torch.cat([cls] + pooled)).squeeze(-1)


class DisjointModel(nn.Module):
    """Two-stage tagger + relation classifier sharing the decode protocol."""

    def __init__(self, tagger: EntityTagger, relation: RelationClassifier,
                 relation_threshold: float = 0.5):
        super().__init__()
        self.tagger = tagger
        self.relation = relation
        self.relation_threshold = relation_threshold

    def window_entity_types(self, words: list[str], window_start: int = 0) -> list[int]:
        return self.tagger.window_entity_types(words, window_start)

    def window_entity_distributions(self, words: list[str]) -> torch.Tensor:
        return self.tagger.window_entity_distributions(words)

    @torch.no_grad()
    def window_pair_score(self, words: list[str], window_start: int,
                          x_rel: tuple[int, int], y_rel: tuple[int, int]) -> float:
        was_training = self.training
        self.eval()
        logit = self.relation.pair_logit(words, list(words[x_rel[0]:x_rel[1]]),
                                         list(words[y_rel[0]:y_rel[1]]))
        if was_training:
            self.train()
        return torch.sigmoid(logit).item()


def train_disjoint(train_examples: list[ERExample], val_examples: list[ERExample],
                   tagger_encoder: TinyEncoder, relation_encoder: TinyEncoder,
                   config: ExtractorTrainConfig) -> tuple[DisjointModel, list[dict]]:
    """Stage 1 trains the tagger alone; stage 2 trains the relation
    classifier on gold-entity candidate pairs."""
    torch.manual_seed(config.seed)
    tagger = EntityTagger(tagger_encoder)
    relation = RelationClassifier(relation_encoder)
    log: list[dict] = []

    # Stage 1: entity tagging.
    tagger.train()
    optimizer = torch.optim.Adam(tagger.parameters(), lr=config.lr)
    rng = random.Random(config.seed)
    order = list(range(len(train_examples)))
    steps_per_epoch = max(1, math.ceil(len(order) / config.batch_size))
    scheduler = _make_scheduler(optimizer, config, steps_per_epoch * config.epochs)
    for epoch in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in range(0, len(order), config.batch_size):
            batch = [train_examples[j] for j in order[i:i + config.batch_size]]
            optimizer.zero_grad()
            loss = torch.zeros(())
            for ex in batch:
                words, labels = ex.words(), ex.token_labels()
                for window in enumerate_spans(len(words), config.window):
                    logits = tagger.window_entity_logits(
                        words[window.start_tok:window.end_tok])
                    target = torch.tensor(labels[window.start_tok:window.end_tok],
                                          dtype=torch.long)
                    loss = loss + F.cross_entropy(logits, target, reduction="sum")
            if not torch.isfinite(loss):
                raise FloatingPointError(f"non-finite tagger loss in epoch {epoch}")
            loss.backward()
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            epoch_loss += loss.item()
        log.append({"stage": "entity", "epoch": epoch, "loss": epoch_loss})

    # Stage 2: relation classification over gold-entity pairs.
    relation.train()
    pairs = []
    for ex in train_examples:
        words = ex.words()
        genes, estimates = gold_spans_by_type(ex)
        positive = ex.gold_positive_pairs()
        for window in enumerate_spans(len(words), config.window):
            for g, e in candidate_pairs(genes, estimates, window):
                pairs.append((words[window.start_tok:window.end_tok],
                              words[g[0]:g[1]], words[e[0]:e[1]],
                              1.0 if (g, e) in positive else 0.0))
    optimizer = torch.optim.Adam(relation.parameters(), lr=config.lr)
    order = list(range(len(pairs)))
    steps_per_epoch = max(1, math.ceil(len(order) / config.batch_size))
    scheduler = _make_scheduler(optimizer, config, steps_per_epoch * config.epochs)
    for epoch in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in range(0, len(order), config.batch_size):
            optimizer.zero_grad()
            loss = torch.zeros(())
            for j in order[i:i + config.batch_size]:
                window_words, x_words, y_words, target = pairs[j]
                logit = relation.pair_logit(window_words, x_words, y_words)
                loss = loss + F.binary_cross_entropy_with_logits(
                    logit, torch.tensor(target), reduction="sum")
            if not torch.isfinite(loss):
                raise FloatingPointError(f"non-finite relation loss in epoch {epoch}")
            loss.backward()
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            epoch_loss += loss.item()
        log.append({"stage": "relation", "epoch": epoch, "loss": epoch_loss})

    model = DisjointModel(tagger, relation, relation_threshold=config.relation_threshold)
    model.eval()
    report = evaluate_extractor(model, val_examples or train_examples,
                                config.window, config.relation_threshold)
    log.append({"stage": "final", "val_entity_f1": report["entity"].f1,
                "val_relation_f1": report["relation"].f1})
    return model, log


def train(train_examples, val_examples, mode: str, config: ExtractorTrainConfig,
          encoder_factory):
    """Dispatcher: ``joint`` -> JointModel, ``disjoint`` -> DisjointModel.

    ``encoder_factory(seed_offset)`` builds a fresh trainable encoder; the
    disjoint mode needs two (one per stage).
    """
    if mode == "joint":
        return train_joint(train_examples, val_examples, encoder_factory(0), config)
    if mode == "disjoint":
        return train_disjoint(train_examples, val_examples,
                              encoder_factory(0), encoder_factory(1), config)
    raise ValueError(f"unknown extraction mode {mode!r}")


# ---------------------------------------------------------------------------
# JSONL wire format
# ---------------------------------------------------------------------------

def example_to_dict(example: ERExample) -> dict:
    return {
        "pmid": example.pmid,
        "sent_id": example.sent_id,
        "text": example.text,
        "tokens": [{"token": t.token, "start": t.start, "end": t.end}
                   for t in example.tokens],
        "entities": [{"start": e.start_tok, "end": e.end_tok, "type": e.type}
                     for e in example.entities],
        "relations": [{"gene": r.gene_idx, "estimate": r.estimate_idx,
                       "polarity": r.polarity} for r in example.relations],
    }


def example_from_dict(rec: dict) -> ERExample:
    from .documents import is_numeric_token

    tokens = [TokenSpan(token=t["token"], start=t["start"], end=t["end"],
                        is_numeric=is_numeric_token(t["token"]))
              for t in rec["tokens"]]
    entities = [EntitySpan(e["start"], e["end"], e["type"]) for e in rec["entities"]]
    relations = [RelationPair(r["gene"], r["estimate"], r["polarity"])
                 for r in rec["relations"]]
    return ERExample(pmid=rec["pmid"], sent_id=rec["sent_id"], text=rec["text"],
                     tokens=tokens, entities=entities, relations=relations)


def write_er_jsonl(path, examples: list[ERExample]):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_dict(ex), ensure_ascii=False) + "\n")
    return path


def read_er_jsonl(path) -> list[ERExample]:
    out = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(example_from_dict(json.loads(line)))
    return out
