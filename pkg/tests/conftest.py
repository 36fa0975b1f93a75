"""Shared builders: minimal PDFs, docx archives, corpora, and mock scripts."""
from __future__ import annotations

import io
import zipfile
import zlib

import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    outcomes: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = str(getattr(rep, "nodeid", ""))
            if "test_acceptance" in nodeid and getattr(rep, "when", "call") == "call":
                outcomes[nodeid] = status
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(outcomes):
        label = "PASS" if outcomes[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"[{label}] {nodeid.split('::')[-1]}")

from finrag.config import ChunkParams
from finrag.embedding import LocalHashProvider
from finrag.indexstore import build_snapshot
from finrag.ingestion import Chunk


def _pdf_escape(text: str) -> str:
    return text.replace("\\", r"\\").replace("(", r"\(").replace(")", r"\)")


def make_pdf(lines: list[str], compress: bool = False) -> bytes:
    """A one-page PDF whose content stream shows each line with Tj."""
    ops = ["BT", "/F1 12 Tf", "72 720 Td"]
    for i, line in enumerate(lines):
        if i:
            ops.append("0 -14 Td")
        ops.append(f"({_pdf_escape(line)}) Tj")
    ops.append("ET")
    content = "\n".join(ops).encode("latin-1")
    filters = b""
    if compress:
        content = zlib.compress(content)
        filters = b" /Filter /FlateDecode"
    objects = [
        b"1 0 obj << /Type /Catalog /Pages 2 0 R >> endobj\n",
        b"2 0 obj << /Type /Pages /Kids [3 0 R] /Count 1 >> endobj\n",
        b"3 0 obj << /Type /Page /Parent 2 0 R /Contents 4 0 R /MediaBox [0 0 612 792] >> endobj\n",
        b"4 0 obj << /Length %d%s >> stream\n%s\nendstream endobj\n"
        % (len(content), filters, content),
        b"5 0 obj << /Type /Font /Subtype /Type1 /BaseFont /Helvetica >> endobj\n",
    ]
    return b"%PDF-1.4\n" + b"".join(objects) + b"%%EOF\n"


def make_scanned_pdf() -> bytes:
    """A PDF with an image XObject and no text operators."""
    image = b"\x00" * 32
    objects = [
        b"1 0 obj << /Type /Catalog /Pages 2 0 R >> endobj\n",
        b"2 0 obj << /Type /Pages /Kids [3 0 R] /Count 1 >> endobj\n",
        b"3 0 obj << /Type /Page /Parent 2 0 R /Contents 4 0 R >> endobj\n",
        b"4 0 obj << /Length 21 >> stream\nq 612 0 0 792 0 0 cm Q\nendstream endobj\n",
        b"5 0 obj << /Subtype /Image /Width 8 /Height 8 /Length %d >> stream\n%s\nendstream endobj\n"
        % (len(image), image),
    ]
    return b"%PDF-1.4\n" + b"".join(objects) + b"%%EOF\n"


_DOCX_NS = 'xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main"'


def make_docx(paragraphs: list[str], tables: list[list[list[str]]] | None = None) -> bytes:
    body_parts = []
    for para in paragraphs:
        body_parts.append(f"<w:p><w:r><w:t>{para}</w:t></w:r></w:p>")
    for rows in tables or []:
        cells_xml = []
        for row in rows:
            tcs = "".join(f"<w:tc><w:p><w:r><w:t>{c}</w:t></w:r></w:p></w:tc>" for c in row)
            cells_xml.append(f"<w:tr>{tcs}</w:tr>")
        body_parts.append(f"<w:tbl>{''.join(cells_xml)}</w:tbl>")
    document = (
        f'<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        f"<w:document {_DOCX_NS}><w:body>{''.join(body_parts)}</w:body></w:document>"
    )
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr(
            "[Content_Types].xml",
            '<?xml version="1.0"?><Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types"/>',
        )
        zf.writestr("word/document.xml", document)
    return buffer.getvalue()


def make_chunk(chunk_id: str, text: str) -> Chunk:
    doc_id, _, seq = chunk_id.rpartition("#")
    return Chunk(
        chunk_id=chunk_id,
        doc_id=doc_id or chunk_id,
        text=text,
        token_count=len(text.split()),
        char_span=(0, len(text)),
        seq=int(seq) if seq.isdigit() else 0,
    )


TOY_CORPUS = {
    "d1#0": "net income rose",
    "d2#0": "income tax",
    "d3#0": "revenue grew fast",
}


@pytest.fixture
def toy_snapshot():
    """The 3-chunk corpus behind the BM25 hand-derived scores."""
    chunks = [make_chunk(cid, text) for cid, text in TOY_CORPUS.items()]
    return build_snapshot(chunks, LocalHashProvider(dim=16, seed=7))


@pytest.fixture
def chunk_params():
    return ChunkParams()
