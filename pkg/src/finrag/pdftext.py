"""Text-layer extraction for simple PDFs.

Walks every stream object in the file, inflates FlateDecode streams, and
replays the text-showing operators (Tj, ', ", TJ) inside BT/ET blocks.
Handles literal strings with escapes and hex strings (including UTF-16BE).
No OCR, no font cmaps: scanned or exotically encoded PDFs yield no text,
which the ingestion layer reports as an empty-extraction error.
"""
from __future__ import annotations

import re
import zlib

_OBJ_RE = re.compile(rb"\d+\s+\d+\s+obj(.*?)endobj", re.DOTALL)
_STREAM_RE = re.compile(rb"stream\r?\n(.*?)\r?\nendstream", re.DOTALL)
_BT_ET_RE = re.compile(rb"BT(.*?)ET", re.DOTALL)
# string-or-operator tokens inside a text block
_TEXT_TOKEN_RE = re.compile(
    rb"\((?:\\.|[^\\()])*\)\s*(?:Tj|')"  # (str) Tj   (str) '
    rb"|\((?:\\.|[^\\()])*\)\s*\""  # aw ac (str) "
    rb"|<[0-9A-Fa-f\s]*>\s*Tj"  # <hex> Tj
    rb"|\[((?:\((?:\\.|[^\\()])*\)|<[0-9A-Fa-f\s]*>|[-+0-9.\s])*)\]\s*TJ"  # [...] TJ
    rb"|T\*|TD|Td|Tm",
    re.DOTALL,
)
_STR_OR_HEX_RE = re.compile(rb"\((?:\\.|[^\\()])*\)|<[0-9A-Fa-f\s]*>", re.DOTALL)

_ESCAPES = {
    b"n": "\n", b"r": "\r", b"t": "\t", b"b": "\b", b"f": "\f",
    b"(": "(", b")": ")", b"\\": "\\",
}


def _decode_literal(raw: bytes) -> str:
    """Decode the inside of a ( ... ) literal string."""
    out: list[str] = []
    i = 0
    while i < len(raw):
        ch = raw[i : i + 1]
        if ch == b"\\":
            nxt = raw[i + 1 : i + 2]
            if nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                i += 2
            elif nxt.isdigit():
                octal = raw[i + 1 : i + 4]
                j = 1
                while j < 3 and i + 1 + j < len(raw) and raw[i + 1 + j : i + 2 + j].isdigit():
                    j += 1
                out.append(chr(int(raw[i + 1 : i + 1 + j], 8)))
                i += 1 + j
            elif nxt in (b"\n", b"\r"):
                i += 2  # line continuation
            else:
                i += 1
        else:
            out.append(ch.decode("latin-1"))
            i += 1
    return "".join(out)


def _decode_hex(raw: bytes) -> str:
    digits = re.sub(rb"\s", b"", raw)
    if len(digits) % 2:
        digits += b"0"
    data = bytes.fromhex(digits.decode("ascii"))
    if data[:2] == b"\xfe\xff":
        return data[2:].decode("utf-16-be", errors="replace")
    return data.decode("latin-1")


def _decode_string_token(token: bytes) -> str:
    if token.startswith(b"("):
        return _decode_literal(token[1:-1])
    return _decode_hex(token[1:-1])


def _text_from_content(content: bytes) -> str:
    lines: list[str] = []
    for block in _BT_ET_RE.finditer(content):
        pieces: list[str] = []
        for match in _TEXT_TOKEN_RE.finditer(block.group(1)):
            token = match.group(0)
            if token in (b"T*",) or token.endswith((b"TD", b"Td", b"Tm")):
                if pieces and pieces[-1] != "\n":
                    pieces.append("\n")
                continue
            if token.rstrip().endswith(b"TJ"):
                for part in _STR_OR_HEX_RE.finditer(token):
                    pieces.append(_decode_string_token(part.group(0)))
            else:
                string = _STR_OR_HEX_RE.match(token)
                if string:
                    if token.rstrip().endswith((b"'", b'"')) and pieces:
                        pieces.append("\n")  # ' and " move to the next line first
                    pieces.append(_decode_string_token(string.group(0)))
        text = "".join(pieces).strip("\n")
        if text.strip():
            lines.append(text)
    return "\n".join(lines)


def extract_text(data: bytes) -> str:
    """Extract the text layer of a PDF; empty string when none exists."""
    if not data.lstrip().startswith(b"%PDF"):
        raise ValueError("not a PDF document (missing %PDF header)")
    chunks: list[str] = []
    for obj in _OBJ_RE.finditer(data):
        body = obj.group(1)
        stream = _STREAM_RE.search(body)
        if stream is None:
            continue
        head = body[: stream.start()]
        if b"/Image" in head or b"/FontFile" in head:
            continue
        raw = stream.group(1)
        if b"/FlateDecode" in head:
            try:
                raw = zlib.decompress(raw)
            except zlib.error:
                continue
        if b"BT" not in raw:
            continue
        text = _text_from_content(raw)
        if text:
            chunks.append(text)
    return "\n".join(chunks)
