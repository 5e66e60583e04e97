"""Metric correctness against an exact rational-arithmetic oracle."""

import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from penkb.metrics import (ConfusionCounts, MetricReport, compute_metrics,
                           count_confusion, metrics_from_counts, set_prf,
                           split_by_document)


def oracle_metrics(tp, fp, fn, tn):
    """Exact metrics via Fraction; None where a denominator vanishes."""
    def frac(num, den):
        return None if den == 0 else Fraction(num, den)

    p = frac(tp, tp + fp)
    r = frac(tp, tp + fn)
    f1 = None
    if p is not None and r is not None and p + r > 0:
        f1 = 2 * p * r / (p + r)
    acc = frac(tp + tn, tp + fp + fn + tn)
    den_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = None
    if den_sq > 0:
        mcc = (tp * tn - fp * fn) / math.sqrt(den_sq)
    return {"p": p, "r": r, "f1": f1, "acc": acc, "mcc": mcc}


def assert_matches_oracle(counts: ConfusionCounts, tol=1e-9):
    report = metrics_from_counts(counts)
    expected = oracle_metrics(counts.tp, counts.fp, counts.fn, counts.tn)
    for name, exp in expected.items():
        got = getattr(report, name)
        if exp is None:
            assert math.isnan(got), f"{name} should be NaN for {counts}"
            assert any(name in flag for flag in report.flags)
        else:
            assert got == pytest.approx(float(exp), abs=tol), f"{name} for {counts}"


def test_exhaustive_small_tables():
    for tp, fp, fn, tn in product(range(6), repeat=4):
        assert_matches_oracle(ConfusionCounts(tp, fp, fn, tn))


def test_perfect_predictions():
    report = compute_metrics([1, 0, 1, 1, 0], [1, 0, 1, 1, 0])
    for name in ("f1", "p", "r", "acc", "mcc"):
        assert getattr(report, name) == pytest.approx(1.0)
    assert report.flags == ()


def test_all_ones_confusion_gives_zero_mcc():
    report = metrics_from_counts(ConfusionCounts(1, 1, 1, 1))
    assert report.mcc == pytest.approx(0.0)


def test_f1_harmonic_mean_rounding():
    # 2 * 0.92 * 0.86 / (0.92 + 0.86) rounds to 0.89 at two decimals.
    f1 = 2 * 0.92 * 0.86 / (0.92 + 0.86)
    assert f1 == pytest.approx(0.889, abs=5e-4)
    assert round(f1, 2) == 0.89


def test_undefined_metrics_are_flagged_not_zero():
    report = metrics_from_counts(ConfusionCounts(0, 0, 0, 4))
    assert math.isnan(report.p) and math.isnan(report.r) and math.isnan(report.f1)
    assert math.isnan(report.mcc)
    assert "precision_undefined" in report.flags
    assert report.acc == pytest.approx(1.0)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        compute_metrics([1, 0], [1])


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60),
       st.randoms(use_true_random=False))
def test_permutation_invariance(pairs, rng):
    preds = [p for p, _ in pairs]
    golds = [g for _, g in pairs]
    base = compute_metrics(preds, golds)
    shuffled = pairs[:]
    rng.shuffle(shuffled)
    perm = compute_metrics([p for p, _ in shuffled], [g for _, g in shuffled])
    for name in ("f1", "p", "r", "acc", "mcc"):
        a, b = getattr(base, name), getattr(perm, name)
        assert (math.isnan(a) and math.isnan(b)) or a == pytest.approx(b)


def test_set_prf():
    report = set_prf({1, 2, 3}, {2, 3, 4})
    assert report.p == pytest.approx(2 / 3)
    assert report.r == pytest.approx(2 / 3)
    assert math.isnan(report.acc) and math.isnan(report.mcc)


# ---------------------------------------------------------------------------
# Document-level splitting
# ---------------------------------------------------------------------------

def test_split_sizes_10_docs():
    splits = split_by_document([str(i) for i in range(10)], (0.8, 0.1, 0.1), seed=0)
    assert [len(s) for s in splits] == [8, 1, 1]


def test_split_deterministic_per_seed():
    pmids = [str(i) for i in range(23)]
    assert split_by_document(pmids, (0.7, 0.2, 0.1), 5) == \
        split_by_document(pmids, (0.7, 0.2, 0.1), 5)


def test_split_disjoint_and_complete():
    pmids = [str(i) for i in range(17)]
    splits = split_by_document(pmids, (0.5, 0.25, 0.25), seed=3)
    seen = [p for s in splits for p in s]
    assert sorted(seen) == sorted(pmids)
    assert len(set(splits[0]) & set(splits[1])) == 0
    assert len(set(splits[0]) & set(splits[2])) == 0
    assert len(set(splits[1]) & set(splits[2])) == 0


def test_split_rejects_bad_ratios():
    with pytest.raises(ValueError):
        split_by_document(["a", "b"], (0.5, 0.4), seed=0)


def test_split_rejects_duplicate_pmids():
    with pytest.raises(ValueError):
        split_by_document(["a", "a", "b"], (0.5, 0.5), seed=0)
