"""Structured-document ingestion: XML/plain-text parsing, sentence
segmentation, and offset-anchored tokenization.

Full-text articles arrive as TEI-style XML produced by an external PDF
converter (or as pre-extracted plain text).  Parsing keeps section reading
order, drops figure/table content, and flags the abstract so downstream
sentence extraction can skip it without losing the text.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path


class DocumentError(Exception):
    pass


class EmptyDocumentError(DocumentError):
    pass


class MalformedXMLError(DocumentError):
    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class Section:
    title: str
    text: str
    excluded: bool = False  # abstracts are kept but skipped by segmentation


@dataclass(frozen=True)
class Document:
    pmid: str
    sections: tuple[Section, ...]
    source_format: str  # "xml" | "text"

    def __post_init__(self):
        if not self.pmid:
            raise ValueError("pmid must be non-empty")
        if self.source_format not in ("xml", "text"):
            raise ValueError(f"unknown source_format {self.source_format!r}")

    def body_sections(self) -> list[Section]:
        return [s for s in self.sections if not s.excluded]


@dataclass(frozen=True)
class Sentence:
    pmid: str
    sent_id: int
    text: str
    section: str


@dataclass(frozen=True)
class TokenSpan:
    token: str
    start: int
    end: int
    is_numeric: bool

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span [{self.start},{self.end})")


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for doc in self.documents:
            if doc.pmid in seen:
                raise ValueError(f"duplicate pmid {doc.pmid}")
            seen.add(doc.pmid)

    def pmids(self) -> list[str]:
        return [d.pmid for d in self.documents]

    def get(self, pmid: str) -> Document:
        for doc in self.documents:
            if doc.pmid == pmid:
                return doc
        raise KeyError(pmid)


# Tags whose subtree content never belongs to running text.
DEFAULT_DROP_TAGS = frozenset({"figure", "table", "fig", "table-wrap", "graphic", "formula"})
DEFAULT_ABSTRACT_TAGS = frozenset({"abstract"})
DEFAULT_PARAGRAPH_TAG = "p"
DEFAULT_SECTION_TAG = "div"
DEFAULT_TITLE_TAG = "head"

_WS = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def _local(tag) -> str:
    # strip any XML namespace: "{http://...}p" -> "p"
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1].lower()


def _collect_text(elem, drop_tags) -> str:
    """Running text of an element, skipping dropped subtrees."""
    parts = []

    def walk(node):
        if _local(node.tag) in drop_tags:
            # tail of a dropped element still belongs to the parent's text
            return
        if node.text:
            parts.append(node.text)
        for child in node:
            walk(child)
            if child.tail:
                parts.append(child.tail)

    walk(elem)
    return normalize_ws(" ".join(parts))


def parse_document(raw: bytes, format: str, pmid: str,
                   paragraph_tag: str = DEFAULT_PARAGRAPH_TAG,
                   section_tag: str = DEFAULT_SECTION_TAG,
                   title_tag: str = DEFAULT_TITLE_TAG,
                   abstract_tags=DEFAULT_ABSTRACT_TAGS,
                   drop_tags=DEFAULT_DROP_TAGS) -> Document:
    """Parse converter output into a Document.

    XML mode walks the tree in reading order: each abstract element becomes
    an excluded section, each section container (default ``div``) becomes one
    section titled by its heading element, and stray paragraphs outside any
    container are gathered into a trailing "body" section.  Text mode yields
    a single "body" section.
    """
    text = raw.decode("utf-8")
    if format == "text":
        body = normalize_ws(text)
        if not body:
            raise EmptyDocumentError(f"{pmid}: empty text document")
        return Document(pmid=pmid, sections=(Section("body", body),), source_format="text")
    if format != "xml":
        raise ValueError(f"unknown format {format!r}")

    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, col = exc.position
        lines = raw.split(b"\n")
        offset = sum(len(l) + 1 for l in lines[: line - 1]) + col
        raise MalformedXMLError(str(exc), byte_offset=offset) from exc

    sections: list[Section] = []
    loose: list[str] = []
    seen: set[int] = set()

    def visit(elem):
        if id(elem) in seen:
            return
        tag = _local(elem.tag)
        if tag in drop_tags:
            return
        if tag in abstract_tags:
            seen.add(id(elem))
            abstract = _collect_text(elem, drop_tags)
            if abstract:
                sections.append(Section("abstract", abstract, excluded=True))
            return
        if tag == section_tag:
            seen.add(id(elem))
            title = ""
            paras = []
            for child in elem:
                ctag = _local(child.tag)
                if ctag == title_tag and not title:
                    title = _collect_text(child, drop_tags)
                elif ctag == paragraph_tag:
                    ptext = _collect_text(child, drop_tags)
                    if ptext:
                        paras.append(ptext)
                else:
                    visit(child)
            if paras:
                sections.append(Section(title or "body", " ".join(paras)))
            return
        if tag == paragraph_tag:
            seen.add(id(elem))
            ptext = _collect_text(elem, drop_tags)
            if ptext:
                loose.append(ptext)
            return
        for child in elem:
            visit(child)

    visit(root)
    if loose:
        sections.append(Section("body", " ".join(loose)))
    if not any(not s.excluded for s in sections):
        raise EmptyDocumentError(f"{pmid}: no body text found")
    return Document(pmid=pmid, sections=tuple(sections), source_format="xml")


# ---------------------------------------------------------------------------
# Sentence segmentation
# ---------------------------------------------------------------------------

# Abbreviations that never terminate a sentence (matched case-insensitively
# against the word preceding the period).  Single capitals are deliberately
# not protected: "A. B." splits into two sentences.
ABBREVIATIONS = frozenset({
    "al", "vs", "fig", "figs", "eq", "eqs", "ref", "refs", "no", "nos",
    "ca", "cf", "approx", "etc", "dr", "drs", "prof", "st", "resp",
    "e.g", "i.e", "conc", "min", "max",
})

_BOUNDARY = re.compile(r"([.?!]+)(\s+)")
_NEXT_START = re.compile(r"[\"'(\[]?[A-Z0-9]")
_PREV_WORD = re.compile(r"([A-Za-z][\w.]*)$")


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitter over whitespace-normalized text."""
    text = normalize_ws(text)
    if not text:
        return []
    sentences = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        punct_end = m.end(1)
        rest = text[m.end():]
        if not rest:
            break
        if not _NEXT_START.match(rest):
            continue
        before = text[start:m.start(1)]
        w = _PREV_WORD.search(before)
        if w and w.group(1).rstrip(".").lower() in ABBREVIATIONS:
            continue
        sentences.append(text[start:punct_end].strip())
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return [s for s in sentences if s]


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------

# Numbers keep an optional % suffix as part of the token so that percentages
# ("0.30%") are distinguishable from bare risk-estimate decimals ("12.33").
_NUMBER = re.compile(r"[+-]?\d+(?:\.\d+)?%?")
_WORD = re.compile(r"[A-Za-z](?:[A-Za-z0-9]|[-'](?=[A-Za-z0-9]))*")
_NUMERIC = re.compile(r"[+-]?\d+(?:\.\d+)?")


def is_numeric_token(token: str) -> bool:
    """True iff the token is a bare decimal (one optional leading sign)."""
    return _NUMERIC.fullmatch(token) is not None


def tokenize(text: str) -> list[TokenSpan]:
    """Offset-anchored tokens: numbers, words, then single punctuation chars.

    A leading +/- is consumed into a number only at a position not preceded
    by an alphanumeric or '%' character, so range dashes ("5.43-25.61")
    stay separators while true signed values ("-0.3") survive.
    """
    spans = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        token = None
        if ch.isdigit() or (ch in "+-" and i + 1 < n and text[i + 1].isdigit()
                            and (i == 0 or not (text[i - 1].isalnum() or text[i - 1] == "%"))):
            m = _NUMBER.match(text, i)
            if m:
                token = m.group()
        if token is None and ch.isalpha():
            m = _WORD.match(text, i)
            if m:
                token = m.group()
        if token is None:
            token = ch
        end = i + len(token)
        spans.append(TokenSpan(token=token, start=i, end=end,
                               is_numeric=is_numeric_token(token)))
        i = end
    return spans


def segment_and_tokenize(doc: Document) -> list[tuple[Sentence, list[TokenSpan]]]:
    """Sentences with offset-validated tokens from all non-excluded sections.

    sent_id is dense from 0 in document order.
    """
    out = []
    sent_id = 0
    for section in doc.sections:
        if section.excluded:
            continue
        for sent_text in split_sentences(section.text):
            sentence = Sentence(pmid=doc.pmid, sent_id=sent_id,
                                text=sent_text, section=section.title)
            out.append((sentence, tokenize(sent_text)))
            sent_id += 1
    return out


# ---------------------------------------------------------------------------
# Corpus manifest loading
# ---------------------------------------------------------------------------

def load_corpus(manifest_path) -> Corpus:
    """Load documents listed in a JSONL manifest of {pmid, path, format}.

    Per-record failures (missing file, parse error) are collected on the
    returned Corpus; a duplicate pmid is fatal.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    documents: list[Document] = []
    errors: list[str] = []
    seen: set[str] = set()
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            pmid = str(record["pmid"])
            if pmid in seen:
                raise DocumentError(f"duplicate pmid {pmid} at manifest line {lineno}")
            seen.add(pmid)
            path = Path(record["path"])
            if not path.is_absolute():
                path = base / path
            try:
                raw = path.read_bytes()
                documents.append(parse_document(raw, record["format"], pmid))
            except (OSError, DocumentError, ValueError) as exc:
                errors.append(f"{pmid}: {exc}")
    return Corpus(documents=documents, errors=errors)
