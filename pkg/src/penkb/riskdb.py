"""Clinician-curated risk-object database (ROD) records and KB emission.

The ROD is a CSV with one row per extracted gene-cancer risk estimate:
PMID, Gene, Cancer, Race, OR, RR, HR, Max Age, Total Carriers, Ascertainment.
Absent values are written as "-" (never 0) and parse back to None.  A row
may carry several ascertainment snippets; the CSV field joins them with the
ASCII record separator so per-snippet matching survives the round trip.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

ROD_COLUMNS = ("PMID", "Gene", "Cancer", "Race", "OR", "RR", "HR",
               "Max Age", "Total Carriers", "Ascertainment")
KB_PROVENANCE_COLUMNS = ("Sent ID", "Model Version", "Reviewer Decision")
SNIPPET_SEP = "\x1e"
ABSENT = "-"

REVIEW_DECISIONS = ("accepted", "edited", "rejected", "pending")


class RodSchemaError(Exception):
    pass


@dataclass
class RiskRecord:
    pmid: str
    gene: str
    cancer: str
    race: str = "unknown"
    or_: float | None = None
    rr: float | None = None
    hr: float | None = None
    max_age: int | None = None
    total_carriers: int | None = None
    ascertainment_snippets: list[str] = field(default_factory=list)
    extras: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.or_ is None and self.rr is None and self.hr is None:
            raise ValueError(f"{self.pmid}/{self.gene}: risk row needs one of OR/RR/HR")
        for name in ("or_", "rr", "hr"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{self.pmid}/{self.gene}: {name} must be positive")
        if self.total_carriers is not None and self.total_carriers < 0:
            raise ValueError(f"{self.pmid}/{self.gene}: negative carrier count")


@dataclass
class KBRow:
    record: RiskRecord
    sent_id: int | None = None
    model_version: str = ""
    reviewer_decision: str = "pending"

    def __post_init__(self):
        if self.reviewer_decision not in REVIEW_DECISIONS:
            raise ValueError(f"unknown reviewer decision {self.reviewer_decision!r}")


def _cell(value) -> str:
    if value is None or value == "":
        return ABSENT
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(text: str) -> str | None:
    text = text.strip()
    if text == "" or text == ABSENT:
        return None
    return text


def _parse_float(text: str, column: str, where: str) -> float | None:
    cell = _parse_cell(text)
    if cell is None:
        return None
    try:
        return float(cell)
    except ValueError:
        raise ValueError(f"{where}: non-numeric {column} cell {cell!r}") from None


def _parse_int(text: str, column: str, where: str) -> int | None:
    cell = _parse_cell(text)
    if cell is None:
        return None
    try:
        return int(float(cell))
    except ValueError:
        raise ValueError(f"{where}: non-numeric {column} cell {cell!r}") from None


def load_rod(path) -> tuple[list[RiskRecord], list[str]]:
    """Parse a ROD CSV into records plus a list of per-row error messages.

    A missing required column is fatal; columns beyond the known schema are
    preserved verbatim in ``record.extras``.
    """
    path = Path(path)
    records: list[RiskRecord] = []
    errors: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ROD_COLUMNS if c not in header]
        if missing:
            raise RodSchemaError(f"{path}: missing required columns {missing}")
        extra_cols = [c for c in header if c not in ROD_COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            where = f"{path.name}:{lineno}"
            try:
                snippets_cell = _parse_cell(row["Ascertainment"]) or ""
                snippets = [s for s in snippets_cell.split(SNIPPET_SEP) if s]
                records.append(RiskRecord(
                    pmid=str(_parse_cell(row["PMID"]) or ""),
                    gene=str(_parse_cell(row["Gene"]) or ""),
                    cancer=str(_parse_cell(row["Cancer"]) or ""),
                    race=_parse_cell(row["Race"]) or "unknown",
                    or_=_parse_float(row["OR"], "OR", where),
                    rr=_parse_float(row["RR"], "RR", where),
                    hr=_parse_float(row["HR"], "HR", where),
                    max_age=_parse_int(row["Max Age"], "Max Age", where),
                    total_carriers=_parse_int(row["Total Carriers"], "Total Carriers", where),
                    ascertainment_snippets=snippets,
                    extras={c: row[c] for c in extra_cols if row.get(c) not in (None, "")},
                ))
            except ValueError as exc:
                errors.append(str(exc))
    return records, errors


def group_by_pmid(records: list[RiskRecord]) -> dict[str, list[RiskRecord]]:
    grouped: dict[str, list[RiskRecord]] = defaultdict(list)
    for record in records:
        grouped[record.pmid].append(record)
    return dict(grouped)


def snippets_by_pmid(records: list[RiskRecord]) -> dict[str, list[str]]:
    """Distinct ascertainment snippets per document, in first-seen order.
    Every record's pmid appears, even with no snippets."""
    out: dict[str, list[str]] = defaultdict(list)
    for record in records:
        bucket = out[record.pmid]
        for snippet in record.ascertainment_snippets:
            if snippet not in bucket:
                bucket.append(snippet)
    return dict(out)


def record_to_cells(record: RiskRecord) -> list[str]:
    return [
        _cell(record.pmid),
        _cell(record.gene),
        _cell(record.cancer),
        _cell(record.race),
        _cell(record.or_),
        _cell(record.rr),
        _cell(record.hr),
        _cell(record.max_age),
        _cell(record.total_carriers),
        SNIPPET_SEP.join(record.ascertainment_snippets) or ABSENT,
    ]


def emit_kb(rows: list[KBRow], path) -> Path:
    """Write accepted/edited rows as CSV in exact ROD column order plus
    provenance columns.  Pending and rejected rows are omitted."""
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(ROD_COLUMNS) + list(KB_PROVENANCE_COLUMNS))
            for row in rows:
                if row.reviewer_decision not in ("accepted", "edited"):
                    continue
                writer.writerow(record_to_cells(row.record) + [
                    _cell(row.sent_id), _cell(row.model_version), row.reviewer_decision,
                ])
    except OSError as exc:
        raise OSError(f"failed writing KB CSV to {path}: {exc}") from exc
    return path
