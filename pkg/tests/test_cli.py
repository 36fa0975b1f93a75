import json
import pathlib

import pytest
from click.testing import CliRunner

from finrag.cli import cli
from finrag.indexstore import load as load_snapshot


@pytest.fixture
def runner():
    return CliRunner()


MARKERS = ["alphax", "betax", "gammax"]


@pytest.fixture
def corpus(tmp_path):
    docs = tmp_path / "docs"
    docs.mkdir()
    for i, marker in enumerate(MARKERS):
        body = (
            f"The {marker} level reached {100 + i} million in Q4 2023. "
            f"Management said the {marker} trend would continue. "
            f"Auditors confirmed the {marker} figures."
        )
        (docs / f"doc{i}.txt").write_text(body, encoding="utf-8")
    return docs


@pytest.fixture
def mock_script(tmp_path):
    """One script covering QA generation, answering, and judging."""
    lines = [
        {"match": "List every factual claim", "response": json.dumps(["claim a", "claim b"])},
        {"match": "decide whether it is supported", "response": json.dumps([True, True])},
        {"match": "Rate how well the answer", "response": "0.80"},
    ]
    for i, marker in enumerate(MARKERS):
        lines.append(
            {
                "regex": True,
                "match": rf"Read the passage below[\s\S]*{marker}",
                "response": json.dumps(
                    {"question": f"What was the {marker} level?", "answer": f"{100 + i} million"}
                ),
            }
        )
        lines.append(
            {
                "match": f"What was the {marker} level?",
                "response": f"The {marker} level was {100 + i} million [1].",
            }
        )
    lines.append({"default": "OK."})
    path = tmp_path / "script.jsonl"
    path.write_text("\n".join(json.dumps(line) for line in lines), encoding="utf-8")
    return path


def _ingest(runner, corpus, tmp_path, *extra):
    snap_dir = tmp_path / "snap"
    result = runner.invoke(
        cli,
        ["ingest", str(corpus), "--out", str(snap_dir), "--deterministic", *extra],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    return snap_dir, json.loads(result.output)


class TestIngest:
    def test_three_txt_files(self, runner, corpus, tmp_path):
        snap_dir, info = _ingest(runner, corpus, tmp_path)
        assert info["documents"] == 3
        assert info["chunks"] == 3
        snapshot = load_snapshot(str(snap_dir))
        assert snapshot.N == 3
        assert snapshot.snapshot_id == info["snapshot_id"]

    def test_set_override_changes_chunking(self, runner, corpus, tmp_path):
        snap_dir, info = _ingest(
            runner, corpus, tmp_path,
            "--set", "ingestion.chunk_size_tokens=8",
            "--set", "ingestion.overlap_tokens=0",
        )
        assert info["chunks"] > 3

    def test_unsupported_file_is_validation_error(self, runner, tmp_path):
        bad = tmp_path / "docs"
        bad.mkdir()
        (bad / "data.csv").write_text("a,b\n")
        result = runner.invoke(cli, ["ingest", str(bad), "--out", str(tmp_path / "s")])
        assert result.exit_code != 0


class TestAsk:
    def test_conversational_closed_book_without_force(self, runner, tmp_path):
        result = runner.invoke(cli, ["ask", "hello"], catch_exceptions=False)
        assert result.exit_code == 0
        record = json.loads(result.output)
        assert record["routing"]["mode"] == "closed_book"
        assert record["ranked"] is None

    def test_force_rag_with_snapshot(self, runner, corpus, mock_script, tmp_path):
        snap_dir, _ = _ingest(runner, corpus, tmp_path)
        result = runner.invoke(
            cli,
            [
                "ask", "What was the alphax level?",
                "--snapshot", str(snap_dir),
                "--mock-script", str(mock_script),
                "--force-rag", "--deterministic",
                "--set", "retriever.type=bm25",
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        record = json.loads(result.output)
        assert record["routing"]["mode"] == "rag"
        assert record["retriever"]["type"] == "bm25"
        assert record["completion"]["content"] == "The alphax level was 100 million [1]."
        assert record["ranked"]["hits"][0]["chunk_id"].endswith("#0")


class TestQaGenAndGrids:
    def _dataset(self, runner, corpus, mock_script, tmp_path, n=3):
        snap_dir, _ = _ingest(runner, corpus, tmp_path)
        qa_path = tmp_path / "qa.jsonl"
        result = runner.invoke(
            cli,
            [
                "qa-gen", "--snapshot", str(snap_dir), "--n", str(n),
                "--types", "factual", "--seed", "5",
                "--mock-script", str(mock_script), "--out", str(qa_path),
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        return snap_dir, qa_path

    def test_qa_gen_writes_dataset(self, runner, corpus, mock_script, tmp_path):
        _, qa_path = self._dataset(runner, corpus, mock_script, tmp_path)
        lines = qa_path.read_text().strip().split("\n")
        assert len(lines) == 3
        pair = json.loads(lines[0])
        assert set(pair) == {"qa_id", "question", "reference_answer", "source_chunk_id", "qtype"}

    def test_eval_retrieval_grid_csv_has_nine_rows(self, runner, corpus, mock_script, tmp_path):
        snap_dir, qa_path = self._dataset(runner, corpus, mock_script, tmp_path)
        out_dir = tmp_path / "reports"
        result = runner.invoke(
            cli,
            [
                "eval-retrieval", "--snapshot", str(snap_dir), "--dataset", str(qa_path),
                "--retrievers", "bm25,vector,hybrid", "--ks", "3,5,10",
                "--out", str(out_dir), "--deterministic",
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        paths = json.loads(result.output)
        csv_lines = pathlib.Path(paths["csv"]).read_text().strip().split("\n")
        assert csv_lines[0] == "retriever_type,top_k,hit_rate,mrr,precision,recall,ap,ndcg"
        assert len(csv_lines) == 10
        # bm25 on marker-keyed questions is a perfect retriever here
        bm25_k3 = csv_lines[1].split(",")
        assert bm25_k3[2] == "1.000000"

    def test_eval_responses_sweep(self, runner, corpus, mock_script, tmp_path):
        snap_dir, qa_path = self._dataset(runner, corpus, mock_script, tmp_path)
        result = runner.invoke(
            cli,
            [
                "eval-responses", "--snapshot", str(snap_dir), "--dataset", str(qa_path),
                "--temperatures", "0.1,0.3,0.5,0.7",
                "--mock-script", str(mock_script),
                "--out", str(tmp_path / "resp"), "--deterministic",
                "--set", "routing.force_rag=true",
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        paths = json.loads(result.output)
        report = json.loads(pathlib.Path(paths["json"]).read_text())
        assert len(report["cells"]) == 4
        for cell in report["cells"]:
            assert cell["faithfulness"] == 1.0
            assert cell["relevancy"] == pytest.approx(0.8)
            assert cell["failures"] == 0

    def test_report_pretty_print_and_csv(self, runner, corpus, mock_script, tmp_path):
        snap_dir, qa_path = self._dataset(runner, corpus, mock_script, tmp_path)
        result = runner.invoke(
            cli,
            [
                "eval-retrieval", "--snapshot", str(snap_dir), "--dataset", str(qa_path),
                "--retrievers", "bm25", "--ks", "3",
                "--out", str(tmp_path / "r"), "--deterministic",
            ],
            catch_exceptions=False,
        )
        paths = json.loads(result.output)
        shown = runner.invoke(cli, ["report", paths["json"]], catch_exceptions=False)
        assert "retriever_type" in shown.output
        assert "bm25" in shown.output
        as_csv = runner.invoke(cli, ["report", paths["json"], "--csv"], catch_exceptions=False)
        assert as_csv.output == pathlib.Path(paths["csv"]).read_text()


class TestExitCodes:
    def test_bad_set_flag_is_validation_error(self, runner):
        import subprocess, sys
        proc = subprocess.run(
            [sys.executable, "-m", "finrag.cli", "ask", "hi", "--set", "retriever.depth=3"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert "unknown config key" in proc.stderr

    def test_unknown_subcommand_is_validation_error(self):
        import subprocess, sys
        proc = subprocess.run(
            [sys.executable, "-m", "finrag.cli", "frobnicate"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1

    def test_rag_without_snapshot_is_runtime_failure(self):
        import subprocess, sys
        proc = subprocess.run(
            [sys.executable, "-m", "finrag.cli", "ask", "what was the revenue?"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert "snapshot" in proc.stderr
