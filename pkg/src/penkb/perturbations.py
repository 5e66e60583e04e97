"""Inference-time input perturbations for ablation.

Three transforms over ER test data probe how much the extractor leans on
token identity versus context:

* ``scale_up_1e3``   (A) — every numeric token value x 1000
* ``scale_down_1e3`` (B) — every numeric token value / 1000
* ``replace_non_numeric`` (C) — gold risk-estimate tokens replaced with
  random non-numeric strings, gold targets updated accordingly

Scaling works on decimal strings (the decimal point shifts), so values
round-trip without float formatting drift; A and B are exact inverses up
to string normalization.  Token offsets are re-derived after substitution.
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass

from .documents import TokenSpan, is_numeric_token
from .extract import ERExample

TASK_KINDS = {
    "A": "scale_up_1e3",
    "B": "scale_down_1e3",
    "C": "replace_non_numeric",
}


@dataclass(frozen=True)
class PerturbationTask:
    kind: str
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in TASK_KINDS.values():
            raise ValueError(f"unknown perturbation kind {self.kind!r}")


def task_a() -> PerturbationTask:
    return PerturbationTask("scale_up_1e3")


def task_b() -> PerturbationTask:
    return PerturbationTask("scale_down_1e3")


def task_c(rng_seed: int = 0) -> PerturbationTask:
    return PerturbationTask("replace_non_numeric", rng_seed=rng_seed)


def normalize_decimal_string(s: str) -> str:
    """Canonical decimal form: no leading/trailing zero padding."""
    sign = ""
    if s and s[0] in "+-":
        sign, s = s[0], s[1:]
    if "." in s:
        int_part, frac = s.split(".", 1)
    else:
        int_part, frac = s, ""
    int_part = int_part.lstrip("0") or "0"
    frac = frac.rstrip("0")
    out = int_part + ("." + frac if frac else "")
    return (sign if sign == "-" and out != "0" else "") + out


def scale_decimal_string(s: str, shift: int) -> str:
    """Shift the decimal point of a decimal literal by ``shift`` places."""
    sign = ""
    if s and s[0] in "+-":
        sign, s = s[0], s[1:]
    if "." in s:
        int_part, frac = s.split(".", 1)
    else:
        int_part, frac = s, ""
    digits = int_part + frac
    point = len(int_part) + shift
    if point >= len(digits):
        out = digits + "0" * (point - len(digits))
    elif point <= 0:
        out = "0." + "0" * (-point) + digits
    else:
        out = digits[:point] + "." + digits[point:]
    return (sign if sign == "-" else "") + normalize_decimal_string(out)


def _rebuild(example: ERExample, replacements: dict[int, str]) -> ERExample:
    """New example with some token surfaces swapped; offsets re-derived from
    the reconstructed sentence text.  Token indices are untouched, so entity
    spans and relations carry over."""
    old = example.tokens
    pieces = []
    new_tokens = []
    cursor = 0
    offset = 0
    for idx, span in enumerate(old):
        pieces.append(example.text[cursor:span.start])
        surface = replacements.get(idx, span.token)
        start = span.start + offset
        pieces.append(surface)
        new_tokens.append(TokenSpan(token=surface, start=start,
                                    end=start + len(surface),
                                    is_numeric=is_numeric_token(surface)))
        offset += len(surface) - len(span.token)
        cursor = span.end
    pieces.append(example.text[cursor:])
    return ERExample(pmid=example.pmid, sent_id=example.sent_id,
                     text="".join(pieces), tokens=new_tokens,
                     entities=list(example.entities),
                     relations=list(example.relations))


def perturb(dataset: list[ERExample], task: PerturbationTask) -> list[ERExample]:
    """Apply one perturbation task to every example."""
    rng = random.Random(task.rng_seed)
    out = []
    for example in dataset:
        replacements: dict[int, str] = {}
        if task.kind == "scale_up_1e3":
            for idx, span in enumerate(example.tokens):
                if span.is_numeric:
                    replacements[idx] = scale_decimal_string(span.token, 3)
        elif task.kind == "scale_down_1e3":
            for idx, span in enumerate(example.tokens):
                if span.is_numeric:
                    replacements[idx] = scale_decimal_string(span.token, -3)
        elif task.kind == "replace_non_numeric":
            for ent in example.entities:
                if ent.type != "risk_estimate":
                    continue
                for idx in range(ent.start_tok, ent.end_tok):
                    replacements[idx] = "".join(
                        rng.choice(string.ascii_uppercase) for _ in range(3))
        out.append(_rebuild(example, replacements))
    return out


def ablation_report(model, examples: list[ERExample], window_config=None,
                    threshold: float | None = None, rng_seed: int = 0) -> dict:
    """Baseline plus Task A/B/C entity and relation metrics."""
    from .extract import evaluate_extractor

    tasks = {"baseline": None, "A": task_a(), "B": task_b(), "C": task_c(rng_seed)}
    report = {}
    for name, task in tasks.items():
        data = examples if task is None else perturb(examples, task)
        scores = evaluate_extractor(model, data, window_config, threshold)
        report[name] = {
            "task": TASK_KINDS.get(name, "baseline"),
            "entity": scores["entity"].as_dict(),
            "relation": scores["relation"].as_dict(),
            "flags": sorted(set(scores["entity"].flags) | set(scores["relation"].flags)),
        }
    return report
