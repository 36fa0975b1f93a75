"""Experiment grids: retriever sweeps and response-quality sweeps.

A retrieval grid crosses retriever types with top-k settings and averages
the six ranking metrics over the dataset (questions are used verbatim as
queries, so retriever comparisons are not confounded by enhancement). A
response sweep crosses decoding parameters and models, answering every
pair and judging faithfulness and relevancy; judge failures are excluded
from means and counted per cell.

Queries run in qa_id order, so a report is a pure function of
(dataset, snapshot, config, scripts) and deterministic runs are
byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone

from ..config import PipelineConfig, fingerprint
from ..generation import GenerationError, QueryEngine
from ..indexstore import IndexSnapshot
from ..llmclient import LlmClient
from ..querypipeline import enhance_query
from ..retrieval import make_retriever
from .judge import JudgeError, judge_faithfulness, judge_relevancy
from .metrics import METRIC_NAMES, all_metrics
from .qa import QaPair, judgments_for

EPOCH_TS = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class EvalReport:
    report_id: str
    kind: str  # retrieval | response
    config_fingerprint: str
    snapshot_id: str
    axes: dict
    cells: tuple[dict, ...]
    per_query: tuple[dict, ...]
    created_at: str

    def to_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "kind": self.kind,
            "config_fingerprint": self.config_fingerprint,
            "snapshot_id": self.snapshot_id,
            "axes": self.axes,
            "cells": list(self.cells),
            "per_query": list(self.per_query),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            report_id=obj["report_id"],
            kind=obj["kind"],
            config_fingerprint=obj["config_fingerprint"],
            snapshot_id=obj["snapshot_id"],
            axes=obj["axes"],
            cells=tuple(obj["cells"]),
            per_query=tuple(obj["per_query"]),
            created_at=obj["created_at"],
        )


def _finish_report(
    kind: str,
    config_fp: str,
    snapshot_id: str,
    axes: dict,
    cells: list[dict],
    per_query: list[dict],
    deterministic: bool,
) -> EvalReport:
    if deterministic:
        payload = json.dumps(
            {
                "kind": kind,
                "config_fingerprint": config_fp,
                "snapshot_id": snapshot_id,
                "axes": axes,
                "cells": cells,
                "per_query": per_query,
            },
            sort_keys=True,
        )
        report_id = "r-" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
        created_at = EPOCH_TS
    else:
        report_id = "r-" + uuid.uuid4().hex[:16]
        created_at = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return EvalReport(
        report_id=report_id,
        kind=kind,
        config_fingerprint=config_fp,
        snapshot_id=snapshot_id,
        axes=axes,
        cells=tuple(cells),
        per_query=tuple(per_query),
        created_at=created_at,
    )


def run_retrieval_grid(
    dataset: list[QaPair],
    snapshot: IndexSnapshot,
    retriever_types: list[str],
    ks: list[int],
    config: PipelineConfig,
    judgments: dict[str, set[str]] | None = None,
    deterministic: bool = False,
    use_enhanced_queries: bool = False,
    progress=None,
) -> EvalReport:
    """One cell per (retriever type, k): six metrics averaged over the dataset.

    Questions are used verbatim as queries by default so retriever
    comparisons are not confounded by enhancement; use_enhanced_queries
    switches to the rule-enhanced text.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    judged = judgments_for(dataset) if judgments is None else judgments
    pairs = sorted(dataset, key=lambda p: p.qa_id)
    queries = {
        p.qa_id: (enhance_query(p.question).enhanced if use_enhanced_queries else p.question)
        for p in pairs
    }
    cells: list[dict] = []
    per_query: list[dict] = []
    total_cells = len(retriever_types) * len(ks)
    done = 0
    for rtype in retriever_types:
        for k in ks:
            cell: dict = {"retriever_type": rtype, "top_k": k}
            try:
                retriever = make_retriever(
                    replace(config.retriever, type=rtype, top_k=k), snapshot
                )
            except Exception as exc:  # construction failure aborts this cell only
                cell["error"] = str(exc)
                cell["n_queries"] = 0
                cells.append(cell)
                done += 1
                continue
            sums = {name: 0.0 for name in METRIC_NAMES}
            for pair in pairs:
                ranked = retriever.retrieve(queries[pair.qa_id], k=k, query_id=pair.qa_id)
                row = all_metrics(ranked.chunk_ids(), judged[pair.qa_id], k)
                for name in METRIC_NAMES:
                    sums[name] += row[name]
                per_query.append(
                    {"qa_id": pair.qa_id, "retriever_type": rtype, "top_k": k, **row}
                )
            for name in METRIC_NAMES:
                cell[name] = sums[name] / len(pairs)
            cell["n_queries"] = len(pairs)
            cells.append(cell)
            done += 1
            if progress is not None:
                progress(done, total_cells)
    return _finish_report(
        "retrieval",
        fingerprint(config),
        snapshot.snapshot_id,
        {"retriever_types": list(retriever_types), "ks": list(ks)},
        cells,
        per_query,
        deterministic,
    )


def run_response_eval(
    dataset: list[QaPair],
    config: PipelineConfig,
    snapshot: IndexSnapshot,
    llm_factory,
    judge: LlmClient,
    temperatures: list[float] | None = None,
    top_ps: list[float] | None = None,
    models: list[str] | None = None,
    deterministic: bool = False,
    trace_path: str | None = None,
    progress=None,
) -> EvalReport:
    """Sweep decoding params and models; judge every answer on both dimensions.

    llm_factory(config) must return the chat client for that configuration
    epoch (with mock providers it can ignore the config).
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    pairs = sorted(dataset, key=lambda p: p.qa_id)
    sweep_models = models or [config.llm.model]
    sweep_temps = temperatures or [config.llm.temperature]
    sweep_top_ps = top_ps or [config.llm.top_p]
    thresholds = config.evaluation

    cells: list[dict] = []
    per_query: list[dict] = []
    combos = [
        (model, temp, top_p)
        for model in sweep_models
        for temp in sweep_temps
        for top_p in sweep_top_ps
    ]
    for index, (model, temp, top_p) in enumerate(combos):
        cfg = replace(
            config,
            llm=replace(config.llm, model=model, temperature=temp, top_p=top_p),
        )
        engine = QueryEngine(
            cfg,
            llm_factory(cfg),
            snapshot=snapshot,
            trace_path=trace_path,
            deterministic=deterministic,
        )
        faith_scores: list[float] = []
        rel_scores: list[float] = []
        faith_below = 0
        rel_below = 0
        failures = 0
        for pair in pairs:
            row: dict = {
                "qa_id": pair.qa_id,
                "model": model,
                "temperature": temp,
                "top_p": top_p,
                "faithfulness": None,
                "relevancy": None,
            }
            try:
                record = engine.answer(pair.question, query_id=pair.qa_id)
            except GenerationError as exc:
                failures += 1
                row["error"] = str(exc)
                per_query.append(row)
                continue
            response = record.completion.content if record.completion else ""
            contexts = [
                snapshot.chunk_by_id(cid) for cid in record.prompt.context_chunk_ids
            ]
            try:
                if not contexts:
                    raise JudgeError("closed-book answer: no contexts to verify against")
                faith = judge_faithfulness(
                    judge, response, contexts, thresholds.faithfulness_threshold
                )
                row["faithfulness"] = faith.faithfulness
                faith_scores.append(faith.faithfulness)
                if faith.flags.get("faithfulness_below_threshold"):
                    faith_below += 1
            except JudgeError as exc:
                failures += 1
                row["faithfulness_error"] = str(exc)
            try:
                rel = judge_relevancy(
                    judge, response, pair.question, thresholds.relevancy_threshold
                )
                row["relevancy"] = rel.relevancy
                rel_scores.append(rel.relevancy)
                if rel.flags.get("relevancy_below_threshold"):
                    rel_below += 1
            except JudgeError as exc:
                failures += 1
                row["relevancy_error"] = str(exc)
            per_query.append(row)
        cells.append(
            {
                "model": model,
                "temperature": temp,
                "top_p": top_p,
                "faithfulness": (sum(faith_scores) / len(faith_scores)) if faith_scores else None,
                "relevancy": (sum(rel_scores) / len(rel_scores)) if rel_scores else None,
                "faithfulness_below_threshold": faith_below,
                "relevancy_below_threshold": rel_below,
                "judged_faithfulness": len(faith_scores),
                "judged_relevancy": len(rel_scores),
                "failures": failures,
                "n_queries": len(pairs),
            }
        )
        if progress is not None:
            progress(index + 1, len(combos))
    return _finish_report(
        "response",
        fingerprint(config),
        snapshot.snapshot_id,
        {"models": sweep_models, "temperatures": sweep_temps, "top_ps": sweep_top_ps},
        cells,
        per_query,
        deterministic,
    )
