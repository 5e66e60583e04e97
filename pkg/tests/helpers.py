"""Shared test utilities: oracle stand-ins for the extractor protocol, a
central finite-difference gradient oracle, and the condensed risk snippet
used by the decode-fidelity checks."""

import torch

from penkb.documents import tokenize
from penkb.extract import ENTITY_TYPES, ERExample, EntitySpan, RelationPair

# Condensed one-sentence risk snippet: five gene clauses reporting odds
# ratios, one with a confidence interval.  With 12-token windows at stride 3
# and the gold tags below, the candidate pairs are exactly the six target
# triples (four positive, two negative).
SNIPPET_TEXT = ("CDKN2A (OR, 12.33); TP53 (OR, 6.70); MLH1 (OR, 6.66); "
                "BRCA2 (OR, 6.20; 95% CI, 4.62-8.17); ATM (OR, 5.71).")
SNIPPET_GENES = ("CDKN2A", "TP53", "MLH1", "BRCA2", "ATM")
SNIPPET_ESTIMATES = ("12.33", "6.70", "6.66", "6.20", "4.62")
SNIPPET_POSITIVE = {("CDKN2A", "12.33"), ("TP53", "6.70"), ("MLH1", "6.66"),
                    ("BRCA2", "6.20")}
SNIPPET_NEGATIVE = {("BRCA2", "4.62"), ("CDKN2A", "6.70")}
SNIPPET_TARGETS = {(g, e, "positive") for g, e in SNIPPET_POSITIVE} | \
                  {(g, e, "negative") for g, e in SNIPPET_NEGATIVE}


def snippet_example(pmid="29488693", sent_id=0) -> ERExample:
    tokens = tokenize(SNIPPET_TEXT)
    surfaces = [t.token for t in tokens]
    entities = []
    index = {}
    for i, s in enumerate(surfaces):
        if s in SNIPPET_GENES:
            index[s] = len(entities)
            entities.append(EntitySpan(i, i + 1, "germline_mutation"))
        elif s in SNIPPET_ESTIMATES:
            index[s] = len(entities)
            entities.append(EntitySpan(i, i + 1, "risk_estimate"))
    relations = [RelationPair(index[g], index[e], "positive")
                 for g, e in SNIPPET_POSITIVE]
    relations += [RelationPair(index[g], index[e], "negative")
                  for g, e in SNIPPET_NEGATIVE]
    return ERExample(pmid=pmid, sent_id=sent_id, text=SNIPPET_TEXT,
                     tokens=tokens, entities=entities, relations=relations)


class OracleModel:
    """Decode-protocol stand-in with fixed tags and pair scores.

    ``tags`` are absolute per-token type ids.  ``scores`` maps
    (gene_abs_span, estimate_abs_span) to a pair score; ``window_scores``
    (keyed by (window_start, gene_span, estimate_span)) wins when present.
    """

    def __init__(self, tags, scores=None, window_scores=None, default=0.1,
                 relation_threshold=0.5):
        self.tags = list(tags)
        self.scores = dict(scores or {})
        self.window_scores = dict(window_scores or {})
        self.default = default
        self.relation_threshold = relation_threshold

    def window_entity_types(self, words, window_start):
        return self.tags[window_start:window_start + len(words)]

    def window_pair_score(self, words, window_start, x_rel, y_rel):
        g = (x_rel[0] + window_start, x_rel[1] + window_start)
        e = (y_rel[0] + window_start, y_rel[1] + window_start)
        if (window_start, g, e) in self.window_scores:
            return self.window_scores[(window_start, g, e)]
        return self.scores.get((g, e), self.default)


def gold_tag_list(example: ERExample):
    return example.token_labels()


def analytic_gradients(model, loss_fn):
    model.zero_grad()
    loss = loss_fn()
    loss.backward()
    return [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
            for p in model.parameters()]


def finite_difference_gradients(model, loss_fn, h=1e-5):
    grads = []
    with torch.no_grad():
        for p in model.parameters():
            g = torch.zeros_like(p)
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * h)
            grads.append(g)
    return grads


def max_relative_error(analytic, numeric) -> float:
    """Worst per-element relative disagreement.

    The denominator is floored at 1e-4 of the largest analytic gradient
    component so that directions the loss is provably flat along (zero
    analytic gradient, finite-difference output pure roundoff noise) are
    compared on an absolute scale instead of dividing noise by noise.
    """
    scale = max(max(a.abs().max().item() for a in analytic), 1.0)
    floor = 1e-4 * scale
    worst = 0.0
    for a, f in zip(analytic, numeric):
        diff = (a - f).abs()
        denom = torch.maximum(torch.maximum(a.abs(), f.abs()),
                              torch.full_like(a, floor))
        worst = max(worst, (diff / denom).max().item())
    return worst
