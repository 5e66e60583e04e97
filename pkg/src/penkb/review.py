"""Human review queue over pipeline predictions.

Review items wrap either a candidate risk triple or a predicted
ascertainment sentence.  The only mutation is a decision
(pending -> accepted | edited | rejected), appended to an immutable JSONL
log; replaying the log reconstructs the exact queue state.  Accepted and
edited triples become KB rows through the same emission path as the
risk-object database.
"""

from __future__ import annotations

import json
import threading
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .riskdb import KBRow, RiskRecord

ITEM_KINDS = ("ascertainment_sentence", "risk_triple")
DECIDED = ("accepted", "edited", "rejected")


class UnknownItemError(KeyError):
    pass


class AlreadyDecidedError(ValueError):
    pass


@dataclass
class ReviewItem:
    item_id: str
    pmid: str
    kind: str
    payload: dict
    confidence: float
    status: str = "pending"
    edited_payload: dict | None = None
    decided_by: str | None = None
    decided_at: str | None = None

    def __post_init__(self):
        if self.kind not in ITEM_KINDS:
            raise ValueError(f"unknown review item kind {self.kind!r}")

    def as_dict(self) -> dict:
        return asdict(self)

    def effective_payload(self) -> dict:
        if self.edited_payload:
            return {**self.payload, **self.edited_payload}
        return dict(self.payload)


def triple_item_id(pmid: str, sent_id: int, gene_span, estimate_span) -> str:
    return (f"t:{pmid}:{sent_id}:{gene_span[0]}-{gene_span[1]}"
            f":{estimate_span[0]}-{estimate_span[1]}")


def sentence_item_id(pmid: str, sent_id: int) -> str:
    return f"a:{pmid}:{sent_id}"


def item_from_triple(triple_dict: dict) -> ReviewItem:
    return ReviewItem(
        item_id=triple_item_id(triple_dict["pmid"], triple_dict["sent_id"],
                               triple_dict["gene_span"], triple_dict["estimate_span"]),
        pmid=triple_dict["pmid"], kind="risk_triple", payload=dict(triple_dict),
        confidence=float(triple_dict["confidence"]))


def item_from_sentence(pmid: str, sent_id: int, text: str, score: float) -> ReviewItem:
    return ReviewItem(
        item_id=sentence_item_id(pmid, sent_id), pmid=pmid,
        kind="ascertainment_sentence",
        payload={"pmid": pmid, "sent_id": sent_id, "text": text, "score": score},
        confidence=float(score))


class ReviewStore:
    """In-memory queue state backed by an append-only decision log."""

    def __init__(self, items: list[ReviewItem], log_path):
        self.log_path = Path(log_path)
        self._lock = threading.Lock()
        self.items: dict[str, ReviewItem] = {}
        for item in items:
            if item.item_id in self.items:
                raise ValueError(f"duplicate review item id {item.item_id}")
            self.items[item.item_id] = item
        if self.log_path.exists():
            self._replay()

    # -- log ---------------------------------------------------------------

    def _replay(self):
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                item = self.items.get(rec["item_id"])
                if item is None:
                    warnings.warn(f"decision log references unknown item "
                                  f"{rec['item_id']}; ignored")
                    continue
                self._apply(item, rec["status"], rec.get("edited_payload"),
                            rec.get("reviewer", "unknown"), rec["ts"])

    @staticmethod
    def _apply(item: ReviewItem, status: str, edited_payload, reviewer: str, ts: str):
        item.status = status
        item.edited_payload = edited_payload
        item.decided_by = reviewer
        item.decided_at = ts

    # -- queries -----------------------------------------------------------

    def get(self, item_id: str) -> ReviewItem:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItemError(item_id)
        return item

    def pending(self, pmid: str | None = None, kind: str | None = None,
                min_confidence: float | None = None) -> list[ReviewItem]:
        """Pending items, confidence-descending (id-ascending tie break)."""
        out = [i for i in self.items.values() if i.status == "pending"]
        if pmid is not None:
            out = [i for i in out if i.pmid == pmid]
        if kind is not None:
            out = [i for i in out if i.kind == kind]
        if min_confidence is not None:
            out = [i for i in out if i.confidence >= min_confidence]
        return sorted(out, key=lambda i: (-i.confidence, i.item_id))

    def decided(self) -> list[ReviewItem]:
        return [i for i in self.items.values() if i.status != "pending"]

    # -- mutation ----------------------------------------------------------

    def decide(self, item_id: str, status: str, edited_payload: dict | None = None,
               reviewer: str = "anonymous") -> ReviewItem:
        if status not in DECIDED:
            raise ValueError(f"invalid decision status {status!r}")
        with self._lock:
            item = self.get(item_id)
            if item.status != "pending":
                raise AlreadyDecidedError(
                    f"item {item_id} already {item.status}")
            ts = datetime.now(timezone.utc).isoformat()
            record = {"ts": ts, "reviewer": reviewer, "item_id": item_id,
                      "status": status, "edited_payload": edited_payload}
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._apply(item, status, edited_payload, reviewer, ts)
            return item

    # -- KB emission -------------------------------------------------------

    def kb_rows(self, model_version: str = "") -> tuple[list[KBRow], list[str]]:
        """Accepted/edited risk triples as KB rows.

        The triple's estimate lands in the metric column named by the
        payload ("metric", default OR); accepted ascertainment sentences for
        the same document fill the Ascertainment column.  Rows whose
        estimate does not parse as a positive decimal are skipped with a
        warning message (the reviewer should have edited them).
        """
        accepted_snippets: dict[str, list[str]] = {}
        for item in self.items.values():
            if item.kind == "ascertainment_sentence" and item.status in ("accepted", "edited"):
                payload = item.effective_payload()
                accepted_snippets.setdefault(item.pmid, []).append(payload["text"])

        rows: list[KBRow] = []
        problems: list[str] = []
        for item in sorted(self.items.values(), key=lambda i: i.item_id):
            if item.kind != "risk_triple" or item.status not in ("accepted", "edited"):
                continue
            payload = item.effective_payload()
            metric = str(payload.get("metric", "OR")).upper()
            try:
                estimate = float(payload["estimate"])
                if estimate <= 0:
                    raise ValueError("estimate must be positive")
            except (TypeError, ValueError) as exc:
                problems.append(f"{item.item_id}: unusable estimate "
                                f"{payload.get('estimate')!r} ({exc})")
                continue
            values = {"or_": None, "rr": None, "hr": None}
            key = {"OR": "or_", "RR": "rr", "HR": "hr"}.get(metric)
            if key is None:
                problems.append(f"{item.item_id}: unknown metric {metric!r}")
                continue
            values[key] = estimate
            record = RiskRecord(
                pmid=item.pmid,
                gene=str(payload.get("gene", "")),
                cancer=str(payload.get("cancer", "")),
                race=str(payload.get("race", "unknown")),
                max_age=payload.get("max_age"),
                total_carriers=payload.get("total_carriers"),
                ascertainment_snippets=accepted_snippets.get(item.pmid, []),
                **values)
            rows.append(KBRow(record=record, sent_id=payload.get("sent_id"),
                              model_version=model_version,
                              reviewer_decision=item.status))
        return rows, problems


def load_queue_items(queue_path) -> list[ReviewItem]:
    items = []
    with open(Path(queue_path), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            items.append(ReviewItem(
                item_id=rec["item_id"], pmid=rec["pmid"], kind=rec["kind"],
                payload=rec["payload"], confidence=rec["confidence"]))
    return items


def write_queue_items(path, items: list[ReviewItem]):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps({
                "item_id": item.item_id, "pmid": item.pmid, "kind": item.kind,
                "payload": item.payload, "confidence": item.confidence,
            }, ensure_ascii=False) + "\n")
    return path
