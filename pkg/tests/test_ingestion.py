import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_docx, make_pdf, make_scanned_pdf
from finrag.config import ChunkParams
from finrag.ingestion import (
    Document,
    EmptyExtractionError,
    IngestError,
    chunk_document,
    load_document,
    split_sentences,
)


class TestLoadDocument:
    def test_txt_pass_through(self):
        doc = load_document(b"Revenue grew 10%.", "q4.txt")
        assert doc.body == "Revenue grew 10%."
        assert doc.format == "txt"
        assert doc.title == "Revenue grew 10%."

    def test_scanned_pdf_rejected(self):
        with pytest.raises(EmptyExtractionError):
            load_document(make_scanned_pdf(), "scan.pdf")

    def test_identical_bytes_different_filenames(self):
        data = b"Net income was $2.7B in Q4 2023."
        a = load_document(data, "alpha.txt")
        b = load_document(data, "beta.txt")
        assert a.body == b.body
        prefix_a, _, suffix_a = a.doc_id.partition("-")
        prefix_b, _, suffix_b = b.doc_id.partition("-")
        assert prefix_a == prefix_b
        assert suffix_a == "alpha"
        assert suffix_b == "beta"

    def test_deterministic_doc_id(self):
        data = b"Some body text."
        assert load_document(data, "x.txt").doc_id == load_document(data, "x.txt").doc_id

    def test_unsupported_format(self):
        with pytest.raises(IngestError, match="unsupported format"):
            load_document(b"col1,col2", "table.csv")

    def test_decode_failure(self):
        with pytest.raises(IngestError, match="decode failure"):
            load_document(b"\xff\xfe\x00bad", "broken.txt")

    def test_line_ending_and_nfc_normalization(self):
        doc = load_document("Café margins.\r\nMore text.".encode("utf-8"), "n.txt")
        assert "\r" not in doc.body
        assert "Café" in doc.body

    def test_empty_txt_rejected(self):
        with pytest.raises(EmptyExtractionError):
            load_document(b"   \n  ", "blank.txt")

    def test_pdf_text_layer(self):
        pdf = make_pdf(["Nvidia reported net income of $2.7B in Q4 2023.", "Margins improved."])
        doc = load_document(pdf, "report.pdf")
        assert "net income of $2.7B" in doc.body
        assert "Margins improved." in doc.body
        assert doc.format == "pdf"

    def test_pdf_flate_stream(self):
        pdf = make_pdf(["Compressed revenue line."], compress=True)
        doc = load_document(pdf, "flate.pdf")
        assert "Compressed revenue line." in doc.body

    def test_docx_paragraphs_and_tables(self):
        data = make_docx(
            ["Overview of results.", "Cash flow stayed strong."],
            tables=[[["Metric", "Value"], ["Revenue", "$10B"]]],
        )
        doc = load_document(data, "filing.docx")
        assert "Overview of results." in doc.body
        assert "Metric | Value" in doc.body
        assert "Revenue | $10B" in doc.body
        assert doc.tables == ((("Metric", "Value"), ("Revenue", "$10B")),)

    def test_docx_invalid_archive(self):
        with pytest.raises(IngestError, match="unsupported format"):
            load_document(b"not a zip", "fake.docx")

    def test_md_pipe_table_extracted(self):
        text = "# Results\n\n| Metric | Value |\n| --- | --- |\n| Revenue | $10B |\n"
        doc = load_document(text.encode("utf-8"), "notes.md")
        assert doc.tables == ((("Metric", "Value"), ("Revenue", "$10B")),)
        assert doc.format == "txt"


class TestSplitSentences:
    def test_basic_terminators(self):
        body = "Revenue rose. Margins fell! Did cash improve? Yes."
        spans = split_sentences(body)
        assert [body[s:e] for s, e in spans] == [
            "Revenue rose.",
            "Margins fell!",
            "Did cash improve?",
            "Yes.",
        ]

    def test_abbreviations_do_not_split(self):
        body = "Acme Inc. reported gains. The U.S. Treasury agreed."
        spans = split_sentences(body)
        assert [body[s:e] for s, e in spans] == [
            "Acme Inc. reported gains.",
            "The U.S. Treasury agreed.",
        ]

    def test_decimal_numbers_do_not_split(self):
        body = "EPS was 2.75 this quarter. Revenue hit $2.7B."
        spans = split_sentences(body)
        assert len(spans) == 2

    def test_lowercase_continuation_does_not_split(self):
        body = "The order no. of items stayed flat."
        assert len(split_sentences(body)) == 1

    def test_paragraph_break_is_boundary(self):
        body = "Alpha beta\n\ngamma delta"
        spans = split_sentences(body)
        assert [body[s:e] for s, e in spans] == ["Alpha beta", "gamma delta"]


def _doc(body: str) -> Document:
    return Document(
        doc_id="doc1",
        title="t",
        body=body,
        tables=(),
        source_path="t.txt",
        format="txt",
    )


def _params(size: int, overlap: int) -> ChunkParams:
    return ChunkParams(chunk_size_tokens=size, overlap_tokens=overlap)


def _sentence(index: int, tokens: int) -> str:
    return f"S{index} " + " ".join(f"w{index}x{j}" for j in range(tokens - 1)) + "."


class TestChunkDocument:
    def test_spec_packing_example(self):
        # 6 sentences x 10 tokens, size 30, overlap 10 -> [1-3], [3-5], [5-6]
        body = " ".join(_sentence(i, 10) for i in range(1, 7))
        chunks = chunk_document(_doc(body), _params(30, 10))
        assert len(chunks) == 3
        assert chunks[0].text.startswith("S1") and "S3" in chunks[0].text
        assert chunks[1].text.startswith("S3") and "S5" in chunks[1].text
        assert chunks[2].text.startswith("S5") and "S6" in chunks[2].text
        assert [c.token_count for c in chunks] == [30, 30, 20]
        assert [c.seq for c in chunks] == [0, 1, 2]
        assert [c.chunk_id for c in chunks] == ["doc1#0", "doc1#1", "doc1#2"]

    def test_short_body_single_chunk(self):
        doc = _doc("Tiny body here.")
        chunks = chunk_document(doc, _params(512, 64))
        assert len(chunks) == 1
        assert chunks[0].text == doc.body
        assert chunks[0].char_span == (0, len(doc.body))

    def test_oversize_sentence_is_own_chunk(self):
        body = "Start " + " ".join(f"t{i}" for i in range(699)) + "."
        chunks = chunk_document(_doc(body), _params(512, 64))
        assert len(chunks) == 1
        assert chunks[0].token_count == 700

    def test_empty_body_empty_list(self):
        assert chunk_document(_doc(""), _params(30, 10)) == []

    def test_pure_function(self):
        body = " ".join(_sentence(i, 7) for i in range(1, 12))
        doc = _doc(body)
        assert chunk_document(doc, _params(25, 8)) == chunk_document(doc, _params(25, 8))

    @given(
        st.lists(st.integers(min_value=1, max_value=14), min_size=1, max_size=24),
        st.integers(min_value=4, max_value=40),
        st.integers(min_value=0, max_value=12),
    )
    @settings(max_examples=120, deadline=None)
    def test_packing_properties(self, sentence_sizes, size, overlap):
        overlap = min(overlap, size - 1)
        body = " ".join(_sentence(i, n) for i, n in enumerate(sentence_sizes, start=1))
        doc = _doc(body)
        chunks = chunk_document(doc, _params(size, overlap))
        sentences = split_sentences(body)

        # every chunk is the exact body slice of whole sentences
        coverage = []
        for chunk in chunks:
            start, end = chunk.char_span
            assert doc.body[start:end] == chunk.text
            members = [i for i, (s, e) in enumerate(sentences) if s >= start and e <= end]
            assert members, "chunk must contain whole sentences"
            assert members == list(range(members[0], members[-1] + 1))
            coverage.append((members[0], members[-1]))

        # overlaps-only coverage: consecutive chunks overlap, never skip
        assert coverage[0][0] == 0
        assert coverage[-1][1] == len(sentences) - 1
        for (a_start, a_end), (b_start, b_end) in zip(coverage, coverage[1:]):
            assert a_start < b_start <= a_end + 1
            assert b_end > a_end
            shared = range(b_start, a_end + 1)
            shared_tokens = sum(
                len(doc.body[sentences[i][0]:sentences[i][1]].split()) for i in shared
            )
            assert shared_tokens <= overlap

        # dedup overlaps -> every sentence exactly once, in order
        rebuilt: list[int] = list(range(coverage[0][0], coverage[0][1] + 1))
        for (prev_start, prev_end), (b_start, b_end) in zip(coverage, coverage[1:]):
            rebuilt.extend(range(prev_end + 1, b_end + 1))
        assert rebuilt == list(range(len(sentences)))

        # token budget: size plus at most one oversized sentence
        longest = max(
            len(doc.body[s:e].split()) for s, e in sentences
        )
        for chunk in chunks:
            assert chunk.token_count <= size + longest
