"""Report persistence and the CSV flattening.

Reports round-trip losslessly through JSON. The CSV view has one row per
grid cell; retrieval reports use the column order
retriever_type, top_k, hit_rate, mrr, precision, recall, ap, ndcg.
"""
from __future__ import annotations

import io
import json

from .grid import EvalReport

RETRIEVAL_COLUMNS = ("retriever_type", "top_k", "hit_rate", "mrr", "precision", "recall", "ap", "ndcg")
RESPONSE_COLUMNS = (
    "model",
    "temperature",
    "top_p",
    "faithfulness",
    "relevancy",
    "faithfulness_below_threshold",
    "relevancy_below_threshold",
    "failures",
)


def save_report(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_report(path: str) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalReport.from_dict(json.load(fh))


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def report_to_csv(report: EvalReport) -> str:
    columns = RETRIEVAL_COLUMNS if report.kind == "retrieval" else RESPONSE_COLUMNS
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for cell in report.cells:
        out.write(",".join(_format_value(cell.get(col)) for col in columns) + "\n")
    return out.getvalue()


def format_report(report: EvalReport) -> str:
    """Human-readable table for the CLI `report` subcommand."""
    columns = RETRIEVAL_COLUMNS if report.kind == "retrieval" else RESPONSE_COLUMNS
    rows = [[_format_value(cell.get(col)) for col in columns] for cell in report.cells]
    widths = [
        max(len(col), *(len(row[i]) for row in rows)) if rows else len(col)
        for i, col in enumerate(columns)
    ]
    lines = [
        f"report {report.report_id} ({report.kind})  snapshot={report.snapshot_id}  "
        f"created={report.created_at}",
        "  ".join(col.ljust(widths[i]) for i, col in enumerate(columns)),
    ]
    for row in rows:
        lines.append("  ".join(value.ljust(widths[i]) for i, value in enumerate(row)))
    return "\n".join(lines) + "\n"
