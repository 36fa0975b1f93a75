"""Command-line driver for the full workflow.

Exit codes: 0 success, 1 validation error (bad flags, bad config, bad
inputs), 2 runtime failure. With mock providers, a fixed seed, and
--deterministic, every run is byte-reproducible: timestamps are zeroed and
report ids become content hashes.

Config precedence: --set overrides > FINRAG_* env vars > --config file >
defaults.
"""
from __future__ import annotations

import json
import pathlib
import sys

import click

from . import config as config_mod
from .config import ConfigError, PipelineConfig
from .embedding import make_provider
from .evaluation import (
    format_report,
    generate_qa_pairs,
    load_dataset,
    load_report,
    report_to_csv,
    run_response_eval,
    run_retrieval_grid,
    save_dataset,
    save_report,
)
from .generation import EPOCH_TS, GenerationError, QueryEngine
from .indexstore import SnapshotError, build_snapshot, load as load_snapshot, persist
from .ingestion import IngestError, chunk_document, load_document
from .llmclient import LlmClient, MockChatClient, MockScript, RemoteChatClient
from .retrieval import RetrievalError

DEFAULT_OUT = "finrag-out"


class CliError(click.ClickException):
    exit_code = 1


class RuntimeFailure(click.ClickException):
    exit_code = 2


def _fail_validation(message: str) -> "CliError":
    return CliError(message)


def _load_effective_config(config_path: str | None, sets: tuple[str, ...]) -> PipelineConfig:
    try:
        if config_path:
            cfg = config_mod.load_config_file(config_path)
        else:
            cfg = config_mod.load_config("")
        env = config_mod.env_overrides()
        if env:
            cfg = config_mod.apply_overrides(cfg, env)
        overrides = {}
        for item in sets:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects key=value, got '{item}'")
            overrides[key.strip()] = value.strip()
        if overrides:
            cfg = config_mod.apply_overrides(cfg, overrides)
        return cfg
    except FileNotFoundError as exc:
        raise _fail_validation(f"config file not found: {exc}") from exc
    except ConfigError as exc:
        raise _fail_validation(str(exc)) from exc


def _make_llm(cfg: PipelineConfig, mock_script: str | None) -> LlmClient:
    if cfg.llm.provider == "mock":
        script = MockScript.from_file(mock_script) if mock_script else MockScript()
        return MockChatClient(script, model=cfg.llm.model)
    return RemoteChatClient(
        base_url=cfg.llm.provider, model=cfg.llm.model, provider_id="remote"
    )


def _make_judge(cfg: PipelineConfig, mock_script: str | None) -> LlmClient:
    if cfg.llm.provider == "mock":
        script = MockScript.from_file(mock_script) if mock_script else MockScript()
        return MockChatClient(script, model=cfg.evaluation.judge_model)
    return RemoteChatClient(
        base_url=cfg.llm.provider, model=cfg.evaluation.judge_model, provider_id="remote"
    )


def _out_dir(out: str | None, kind: str) -> pathlib.Path:
    path = pathlib.Path(out) if out else pathlib.Path(DEFAULT_OUT) / kind
    path.mkdir(parents=True, exist_ok=True)
    return path


common_options = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="YAML config file."),
    click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                 help="Dotted-path config override; repeatable."),
]


def _with_common(fn):
    for option in reversed(common_options):
        fn = option(fn)
    return fn


@click.group()
def cli() -> None:
    """Financial RAG evaluation engine."""


def main(argv: list[str] | None = None) -> None:
    """Entry point with normalized exit codes: 1 validation, 2 runtime."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except RuntimeFailure as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except Exception as exc:  # unexpected runtime failure
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", default=None, help="Snapshot output directory.")
@click.option("--deterministic", is_flag=True, help="Zero timestamps for reproducible output.")
@_with_common
def ingest(paths, out, deterministic, config_path, sets):
    """Parse, chunk, embed, and index documents into a snapshot directory."""
    cfg = _load_effective_config(config_path, sets)
    files: list[pathlib.Path] = []
    for raw in paths:
        path = pathlib.Path(raw)
        if path.is_dir():
            files.extend(sorted(p for p in path.rglob("*") if p.is_file()))
        else:
            files.append(path)
    if not files:
        raise _fail_validation("no input files found")
    chunks = []
    n_docs = 0
    for path in files:
        try:
            doc = load_document(path.read_bytes(), path.name)
        except IngestError as exc:
            raise _fail_validation(f"{path}: {exc}") from exc
        chunks.extend(chunk_document(doc, cfg.ingestion))
        n_docs += 1
    provider = make_provider(
        cfg.ingestion.embedding_provider, cfg.ingestion.embedding_dim, cfg.evaluation.seed
    )
    try:
        snapshot = build_snapshot(
            chunks,
            provider,
            chunk_params={
                "chunk_size_tokens": cfg.ingestion.chunk_size_tokens,
                "overlap_tokens": cfg.ingestion.overlap_tokens,
            },
            created_at=EPOCH_TS if deterministic else None,
        )
    except SnapshotError as exc:
        raise _fail_validation(str(exc)) from exc
    out_dir = _out_dir(out, "snapshot")
    persist(snapshot, str(out_dir))
    click.echo(
        json.dumps(
            {
                "snapshot_id": snapshot.snapshot_id,
                "documents": n_docs,
                "chunks": snapshot.N,
                "dir": str(out_dir),
            }
        )
    )


@cli.command()
@click.argument("question")
@click.option("--snapshot", "snapshot_dir", type=click.Path(exists=True), default=None)
@click.option("--force-rag", is_flag=True, help="Route through retrieval regardless of intent.")
@click.option("--mock-script", type=click.Path(exists=True), default=None)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Append the answer record to this JSONL trace log.")
@click.option("--deterministic", is_flag=True)
@_with_common
def ask(question, snapshot_dir, force_rag, mock_script, trace_path, deterministic, config_path, sets):
    """Answer one question and print the full answer record as JSON."""
    cfg = _load_effective_config(config_path, sets)
    snapshot = None
    if snapshot_dir:
        try:
            snapshot = load_snapshot(snapshot_dir)
        except SnapshotError as exc:
            raise _fail_validation(str(exc)) from exc
    engine = QueryEngine(
        cfg,
        _make_llm(cfg, mock_script),
        snapshot=snapshot,
        trace_path=trace_path,
        deterministic=deterministic,
    )
    try:
        record = engine.answer(question, force_rag=True if force_rag else None)
    except (GenerationError, RetrievalError) as exc:
        raise RuntimeFailure(str(exc)) from exc
    click.echo(json.dumps(record.to_dict(), sort_keys=True, indent=2))


@cli.command("qa-gen")
@click.option("--snapshot", "snapshot_dir", type=click.Path(exists=True), required=True)
@click.option("--n", "n_pairs", type=int, required=True)
@click.option("--types", default="factual,numerical,comparative",
              help="Comma-separated question types.")
@click.option("--seed", type=int, default=None, help="Overrides evaluation.seed.")
@click.option("--mock-script", type=click.Path(exists=True), default=None)
@click.option("--out", default=None, help="Dataset JSONL path.")
@_with_common
def qa_gen(snapshot_dir, n_pairs, types, seed, mock_script, out, config_path, sets):
    """Generate a QA dataset from an indexed snapshot."""
    cfg = _load_effective_config(config_path, sets)
    if seed is not None:
        cfg = config_mod.apply_overrides(cfg, {"evaluation.seed": seed})
    try:
        snapshot = load_snapshot(snapshot_dir)
    except SnapshotError as exc:
        raise _fail_validation(str(exc)) from exc
    type_set = {t.strip() for t in types.split(",") if t.strip()}
    try:
        pairs = generate_qa_pairs(
            snapshot, _make_llm(cfg, mock_script), n=n_pairs, types=type_set,
            seed=cfg.evaluation.seed,
        )
    except ValueError as exc:
        raise _fail_validation(str(exc)) from exc
    out_path = (pathlib.Path(out) if out
                else _out_dir(None, "datasets") / "qa.jsonl")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(pairs, str(out_path))
    click.echo(json.dumps({"pairs": len(pairs), "path": str(out_path)}))


def _write_report(report, out: str | None, kind: str) -> dict:
    out_dir = _out_dir(out, kind)
    json_path = out_dir / f"{report.report_id}.json"
    csv_path = out_dir / f"{report.report_id}.csv"
    save_report(report, str(json_path))
    csv_path.write_text(report_to_csv(report), encoding="utf-8")
    return {"report_id": report.report_id, "json": str(json_path), "csv": str(csv_path)}


@cli.command("eval-retrieval")
@click.option("--snapshot", "snapshot_dir", type=click.Path(exists=True), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--retrievers", default="bm25,vector,hybrid", help="Comma-separated types.")
@click.option("--ks", default="3,5,10", help="Comma-separated top-k values.")
@click.option("--out", default=None)
@click.option("--deterministic", is_flag=True)
@_with_common
def eval_retrieval(snapshot_dir, dataset_path, retrievers, ks, out, deterministic, config_path, sets):
    """Run the retriever-type x top-k metrics grid over a QA dataset."""
    cfg = _load_effective_config(config_path, sets)
    try:
        snapshot = load_snapshot(snapshot_dir)
        dataset = load_dataset(dataset_path)
        k_values = [int(k) for k in ks.split(",") if k.strip()]
    except (SnapshotError, ValueError, json.JSONDecodeError) as exc:
        raise _fail_validation(str(exc)) from exc
    retriever_types = [r.strip() for r in retrievers.split(",") if r.strip()]
    try:
        report = run_retrieval_grid(
            dataset, snapshot, retriever_types, k_values, cfg, deterministic=deterministic
        )
    except ValueError as exc:
        raise _fail_validation(str(exc)) from exc
    click.echo(json.dumps(_write_report(report, out, "reports")))


@cli.command("eval-responses")
@click.option("--snapshot", "snapshot_dir", type=click.Path(exists=True), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--temperatures", default=None, help="Comma-separated sweep values.")
@click.option("--top-ps", default=None, help="Comma-separated sweep values.")
@click.option("--models", default=None, help="Comma-separated model ids.")
@click.option("--mock-script", type=click.Path(exists=True), default=None)
@click.option("--out", default=None)
@click.option("--trace", "trace_path", type=click.Path(), default=None)
@click.option("--deterministic", is_flag=True)
@_with_common
def eval_responses(snapshot_dir, dataset_path, temperatures, top_ps, models, mock_script,
                   out, trace_path, deterministic, config_path, sets):
    """Answer and judge every pair across a decoding-parameter/model sweep."""
    cfg = _load_effective_config(config_path, sets)
    try:
        snapshot = load_snapshot(snapshot_dir)
        dataset = load_dataset(dataset_path)
        temps = [float(t) for t in temperatures.split(",")] if temperatures else None
        tops = [float(t) for t in top_ps.split(",")] if top_ps else None
    except (SnapshotError, ValueError, json.JSONDecodeError) as exc:
        raise _fail_validation(str(exc)) from exc
    model_list = [m.strip() for m in models.split(",")] if models else None
    judge = _make_judge(cfg, mock_script)
    try:
        report = run_response_eval(
            dataset, cfg, snapshot,
            llm_factory=lambda c: _make_llm(c, mock_script),
            judge=judge,
            temperatures=temps,
            top_ps=tops,
            models=model_list,
            deterministic=deterministic,
            trace_path=trace_path,
        )
    except ValueError as exc:
        raise _fail_validation(str(exc)) from exc
    click.echo(json.dumps(_write_report(report, out, "reports")))


@cli.command()
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--csv", "as_csv", is_flag=True, help="Print the CSV flattening instead.")
def report(report_path, as_csv):
    """Pretty-print a stored report."""
    try:
        stored = load_report(report_path)
    except (json.JSONDecodeError, KeyError) as exc:
        raise _fail_validation(f"not a report file: {exc}") from exc
    click.echo(report_to_csv(stored) if as_csv else format_report(stored), nl=False)


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8990)
@click.option("--workdir", default=None, help="Service data directory.")
@click.option("--mock-script", type=click.Path(exists=True), default=None)
@_with_common
def serve(host, port, workdir, mock_script, config_path, sets):
    """Start the HTTP service (and the web UI, if assets are built)."""
    import uvicorn

    from .service import create_app

    cfg = _load_effective_config(config_path, sets)
    app = create_app(config=cfg, workdir=workdir, mock_script_path=mock_script)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
