"""Binary classification metrics and document-level splitting.

All metrics are computed from raw confusion counts.  Division-by-zero cases
are reported as NaN together with a flag naming the undefined metric; they
are never silently mapped to 0, since that would corrupt model selection.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field


METRIC_NAMES = ("f1", "p", "r", "acc", "mcc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    f1: float
    p: float
    r: float
    acc: float
    mcc: float
    flags: tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def count_confusion(preds, golds) -> ConfusionCounts:
    """Tally binary predictions against gold labels (truthy == positive)."""
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(golds)} golds")
    tp = fp = fn = tn = 0
    for p, g in zip(preds, golds):
        p, g = bool(p), bool(g)
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def metrics_from_counts(c: ConfusionCounts) -> MetricReport:
    flags = []

    def ratio(num, den, flag):
        if den == 0:
            flags.append(flag)
            return math.nan
        return num / den

    p = ratio(c.tp, c.tp + c.fp, "precision_undefined")
    r = ratio(c.tp, c.tp + c.fn, "recall_undefined")
    if math.isnan(p) or math.isnan(r) or (p + r) == 0:
        flags.append("f1_undefined")
        f1 = math.nan
    else:
        f1 = 2 * p * r / (p + r)
    acc = ratio(c.tp + c.tn, c.total, "accuracy_undefined")

    mcc_den_sq = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if mcc_den_sq == 0:
        flags.append("mcc_undefined")
        mcc = math.nan
    else:
        mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(mcc_den_sq)
    return MetricReport(f1=f1, p=p, r=r, acc=acc, mcc=mcc, flags=tuple(flags))


def compute_metrics(preds, golds) -> MetricReport:
    """F1, precision, recall, accuracy and MCC for binary label sequences."""
    return metrics_from_counts(count_confusion(preds, golds))


def f1_from_pr(p: float, r: float) -> float:
    if p + r == 0:
        return math.nan
    return 2 * p * r / (p + r)


def set_prf(predicted: set, gold: set) -> MetricReport:
    """Micro precision/recall/F1 over two sets of hashable items.

    Used for entity-span and relation-pair scoring, where accuracy and MCC
    have no meaningful "true negative" universe; both are reported as NaN
    with flags.
    """
    tp = len(predicted & gold)
    fp = len(predicted - gold)
    fn = len(gold - predicted)
    report = metrics_from_counts(ConfusionCounts(tp, fp, fn, 0))
    flags = tuple(set(report.flags) | {"accuracy_not_applicable", "mcc_not_applicable"})
    return MetricReport(f1=report.f1, p=report.p, r=report.r,
                        acc=math.nan, mcc=math.nan, flags=flags)


def split_by_document(pmids, ratios, seed: int) -> list[list[str]]:
    """Partition document ids into len(ratios) disjoint splits.

    Deterministic per seed.  Boundary indices come from cumulative-ratio
    rounding so the sizes always sum to the number of documents.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    pmids = list(pmids)
    if len(set(pmids)) != len(pmids):
        raise ValueError("duplicate pmid in corpus")
    rng = random.Random(seed)
    order = sorted(pmids)
    rng.shuffle(order)

    n = len(order)
    splits = []
    prev = 0
    cum = 0.0
    for ratio in ratios:
        cum += ratio
        bound = round(cum * n)
        splits.append(order[prev:bound])
        prev = bound
    # Rounding must not leave stragglers; the final boundary is round(n) == n.
    assigned = set()
    for split in splits:
        for pmid in split:
            if pmid in assigned:
                raise AssertionError(f"pmid {pmid} assigned to two splits")
            assigned.add(pmid)
    if len(assigned) != n:
        raise AssertionError("split dropped documents")
    return splits
