"""Document parsing and sentence-aware chunking.

Supported formats: .txt and .md (pass-through), .docx (paragraph + table
text from the document XML), .pdf (text layer only; scanned PDFs are
rejected). Extracted tables are serialized row-wise as "cell | cell | cell"
lines and appended to the body so they participate in chunking.

Chunking packs whole sentences greedily up to the token budget and seeds
each following chunk with the trailing sentences of the previous one, up to
the overlap budget. A token is a maximal run of non-whitespace characters.
Sentences are never split: a single oversized sentence becomes its own
chunk.
"""
from __future__ import annotations

import hashlib
import io
import re
import unicodedata
import zipfile
from dataclasses import dataclass
from xml.etree import ElementTree

from . import pdftext
from .config import ChunkParams

SUPPORTED_EXTENSIONS = (".pdf", ".txt", ".docx", ".md")

# Words before a '.' that do not end a sentence.
_ABBREVIATIONS = frozenset(
    ["inc", "corp", "u.s", "no", "fig", "q1", "q2", "q3", "q4"]
)


class IngestError(ValueError):
    """Unsupported format, decode failure, or empty extraction."""


class EmptyExtractionError(IngestError):
    """The document has no extractable text layer (e.g. a scanned PDF)."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    tables: tuple[tuple[tuple[str, ...], ...], ...]
    source_path: str
    format: str  # pdf | txt | docx


@dataclass(frozen=True)
class Chunk:
    chunk_id: str  # "doc_id#seq"
    doc_id: str
    text: str
    token_count: int
    char_span: tuple[int, int]
    seq: int


def _normalize(text: str) -> str:
    text = unicodedata.normalize("NFC", text)
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _slug(stem: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9_-]+", "-", stem).strip("-")
    return slug or "doc"


def _doc_id(data: bytes, filename: str) -> str:
    stem = filename.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return f"{hashlib.sha256(data).hexdigest()[:12]}-{_slug(stem)}"


def _decode_text(data: bytes) -> str:
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IngestError(f"decode failure: not valid UTF-8 ({exc})") from exc


_W_NS = "{http://schemas.openxmlformats.org/wordprocessingml/2006/main}"


def _docx_extract(data: bytes) -> tuple[str, list[list[list[str]]]]:
    """Paragraph text plus tables from word/document.xml."""
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            xml = zf.read("word/document.xml")
    except (zipfile.BadZipFile, KeyError) as exc:
        raise IngestError(f"unsupported format: not a readable .docx archive ({exc})") from exc
    try:
        root = ElementTree.fromstring(xml)
    except ElementTree.ParseError as exc:
        raise IngestError(f"unsupported format: malformed document XML ({exc})") from exc

    def para_text(p) -> str:
        return "".join(t.text or "" for t in p.iter(f"{_W_NS}t"))

    paragraphs: list[str] = []
    tables: list[list[list[str]]] = []
    body = root.find(f"{_W_NS}body")
    if body is None:
        return "", []

    def walk(element) -> None:
        for child in element:
            if child.tag == f"{_W_NS}p":
                text = para_text(child)
                if text.strip():
                    paragraphs.append(text)
            elif child.tag == f"{_W_NS}tbl":
                rows = []
                for tr in child.iter(f"{_W_NS}tr"):
                    cells = [
                        " ".join(para_text(p) for p in tc.iter(f"{_W_NS}p")).strip()
                        for tc in tr.iter(f"{_W_NS}tc")
                    ]
                    if cells:
                        rows.append(cells)
                if rows:
                    tables.append(rows)
            else:
                walk(child)

    walk(body)
    return "\n\n".join(paragraphs), tables


_MD_TABLE_ROW = re.compile(r"^\s*\|.*\|\s*$")
_MD_TABLE_SEP = re.compile(r"^\s*\|[\s:|-]+\|\s*$")


def _md_tables(text: str) -> list[list[list[str]]]:
    tables: list[list[list[str]]] = []
    current: list[list[str]] = []
    for line in text.split("\n"):
        if _MD_TABLE_ROW.match(line):
            if _MD_TABLE_SEP.match(line):
                continue
            cells = [c.strip() for c in line.strip().strip("|").split("|")]
            current.append(cells)
        elif current:
            tables.append(current)
            current = []
    if current:
        tables.append(current)
    return tables


def serialize_table(rows: list[list[str]]) -> str:
    return "\n".join(" | ".join(row) for row in rows)


def load_document(data: bytes, filename: str) -> Document:
    """Parse raw bytes into a normalized Document; deterministic per input."""
    lower = filename.lower()
    ext = "." + lower.rsplit(".", 1)[-1] if "." in lower else ""
    if ext not in SUPPORTED_EXTENSIONS:
        raise IngestError(
            f"unsupported format '{ext or filename}': expected one of {SUPPORTED_EXTENSIONS}"
        )
    tables: list[list[list[str]]] = []
    if ext in (".txt", ".md"):
        body = _decode_text(data)
        if ext == ".md":
            tables = _md_tables(body)  # rows already present in body text
        fmt = "txt"
    elif ext == ".docx":
        text, tables = _docx_extract(data)
        body = text
        if tables:
            serialized = "\n\n".join(serialize_table(rows) for rows in tables)
            body = f"{body}\n\n{serialized}" if body.strip() else serialized
        fmt = "docx"
    else:  # .pdf
        try:
            body = pdftext.extract_text(data)
        except ValueError as exc:
            raise IngestError(f"unsupported format: {exc}") from exc
        fmt = "pdf"

    body = _normalize(body).strip("\n")
    if not body.strip():
        raise EmptyExtractionError(
            f"no text extracted from '{filename}' (scanned/empty documents are unsupported)"
        )
    title = next((ln.strip() for ln in body.split("\n") if ln.strip()), filename)
    return Document(
        doc_id=_doc_id(data, filename),
        title=title,
        body=body,
        tables=tuple(tuple(tuple(c for c in row) for row in rows) for rows in tables),
        source_path=filename,
        format=fmt,
    )


# --- sentence splitting ----------------------------------------------------

_TERMINATORS = ".!?"
_CLOSERS = "\"')]’”"


def split_sentences(body: str) -> list[tuple[int, int]]:
    """Spans (start, end) of sentences in body, whitespace-trimmed.

    Boundaries: a terminator (. ! ?) followed by whitespace and an
    uppercase letter or digit — unless the word before a '.' is an
    allowlisted abbreviation — plus blank-line paragraph breaks.
    """
    spans: list[tuple[int, int]] = []
    n = len(body)
    i = 0

    def emit(start: int, end: int) -> None:
        while start < end and body[start].isspace():
            start += 1
        while end > start and body[end - 1].isspace():
            end -= 1
        if start < end:
            spans.append((start, end))

    start = 0
    while i < n:
        ch = body[i]
        if ch == "\n":
            # paragraph break: blank line (possibly with spaces)
            j = i + 1
            while j < n and body[j] in " \t":
                j += 1
            if j < n and body[j] == "\n":
                emit(start, i)
                while j < n and body[j].isspace():
                    j += 1
                start = j
                i = j
                continue
        if ch in _TERMINATORS:
            j = i + 1
            while j < n and body[j] in _CLOSERS:
                j += 1
            end = j
            while j < n and body[j] in " \t\n":
                j += 1
            next_ok = j < n and (body[j].isupper() or body[j].isdigit())
            if next_ok and j > end and not (ch == "." and _is_abbreviation(body, i)):
                emit(start, end)
                start = j
                i = j
                continue
        i += 1
    emit(start, n)
    return spans


def _is_abbreviation(body: str, dot_index: int) -> bool:
    k = dot_index
    while k > 0 and not body[k - 1].isspace():
        k -= 1
    word = body[k:dot_index].lower().lstrip("(\"'“‘")
    return word in _ABBREVIATIONS


def chunk_document(doc: Document, params: ChunkParams) -> list[Chunk]:
    """Sentence-aware greedy packing with trailing-sentence overlap.

    Pure function: identical (doc, params) yields an identical chunk list.
    """
    sents = split_sentences(doc.body)
    if not sents:
        return []
    tokens = [len(doc.body[s:e].split()) for s, e in sents]
    size, overlap_budget = params.chunk_size_tokens, params.overlap_tokens

    chunks: list[Chunk] = []
    overlap: list[int] = []
    i = 0
    seq = 0
    while i < len(sents):
        current = list(overlap)
        total = sum(tokens[j] for j in current)
        # always consume at least one new sentence, even when oversized
        current.append(i)
        total += tokens[i]
        i += 1
        while i < len(sents) and total + tokens[i] <= size:
            current.append(i)
            total += tokens[i]
            i += 1
        span_start = sents[current[0]][0]
        span_end = sents[current[-1]][1]
        text = doc.body[span_start:span_end]
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{seq}",
                doc_id=doc.doc_id,
                text=text,
                token_count=len(text.split()),
                char_span=(span_start, span_end),
                seq=seq,
            )
        )
        seq += 1
        # seed the next chunk with a proper suffix of this one (never the
        # whole chunk) whose cumulative token count fits the overlap budget
        overlap = []
        acc = 0
        for j in reversed(current[1:]):
            if acc + tokens[j] <= overlap_budget:
                overlap.insert(0, j)
                acc += tokens[j]
            else:
                break
    return chunks
