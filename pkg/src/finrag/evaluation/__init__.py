"""Evaluation engine: QA generation, ranking metrics, judging, and grids."""
from .grid import EvalReport, run_response_eval, run_retrieval_grid
from .judge import JudgeError, JudgeScores, judge_faithfulness, judge_relevancy, merge_scores
from .metrics import (
    METRIC_NAMES,
    JudgmentError,
    all_metrics,
    average_precision,
    hit_rate_at_k,
    ndcg_at_k,
    precision_at_k,
    recall_at_k,
    reciprocal_rank,
)
from .qa import QA_TYPES, QaPair, generate_qa_pairs, judgments_for, load_dataset, save_dataset
from .report import RETRIEVAL_COLUMNS, format_report, load_report, report_to_csv, save_report

__all__ = [
    "EvalReport",
    "run_response_eval",
    "run_retrieval_grid",
    "JudgeError",
    "JudgeScores",
    "judge_faithfulness",
    "judge_relevancy",
    "merge_scores",
    "METRIC_NAMES",
    "JudgmentError",
    "all_metrics",
    "average_precision",
    "hit_rate_at_k",
    "ndcg_at_k",
    "precision_at_k",
    "recall_at_k",
    "reciprocal_rank",
    "QA_TYPES",
    "QaPair",
    "generate_qa_pairs",
    "judgments_for",
    "load_dataset",
    "save_dataset",
    "RETRIEVAL_COLUMNS",
    "format_report",
    "load_report",
    "report_to_csv",
    "save_report",
]
