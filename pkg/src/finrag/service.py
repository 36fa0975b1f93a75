"""HTTP API over the pipeline: ingest, configure, query, generate, evaluate.

Single-node service with in-process background workers (one per job kind)
and a JSONL job journal so past reports survive restarts. Config and the
current snapshot are swapped atomically behind a lock; queries issued
during an ingest job are served by the previous snapshot until the new one
lands.

All responses use the envelope {ok, data | error}. Mutating endpoints
honor an Idempotency-Key header: retries with the same key replay the
original response.
"""
from __future__ import annotations

import hashlib
import json
import pathlib
import queue
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from fastapi import FastAPI, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import config as config_mod
from .config import ConfigError, PipelineConfig
from .embedding import make_provider
from .evaluation import (
    generate_qa_pairs,
    load_dataset,
    load_report,
    report_to_csv,
    run_response_eval,
    run_retrieval_grid,
    save_dataset,
    save_report,
)
from .generation import GenerationError, QueryEngine
from .indexstore import IndexSnapshot, SnapshotError, build_snapshot, load as load_snapshot, persist
from .ingestion import IngestError, chunk_document, load_document
from .llmclient import LlmClient, LlmError, MockChatClient, MockScript, ModelRegistry, RemoteChatClient
from .retrieval import RetrievalError

JOB_KINDS = ("ingest", "qa_gen", "retrieval_eval", "response_eval")


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class Job:
    job_id: str
    kind: str
    state: str = "queued"  # queued -> running -> done | failed
    completed: int = 0
    total: int = 0
    result: dict = field(default_factory=dict)
    error: str | None = None
    created_at: str = field(default_factory=_now)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "state": self.state,
            "progress": {"completed": self.completed, "total": self.total},
            "result": self.result,
            "error": self.error,
            "created_at": self.created_at,
        }


class ApiError(Exception):
    def __init__(self, status: int, message: str, fieldname: str | None = None):
        super().__init__(message)
        self.status = status
        self.fieldname = fieldname


class _Worker:
    """One background thread draining one job kind's queue."""

    def __init__(self, state: "ServiceState", kind: str):
        self.state = state
        self.kind = kind
        self.queue: queue.Queue = queue.Queue()
        self.thread = threading.Thread(target=self._loop, daemon=True, name=f"worker-{kind}")
        self.thread.start()

    def submit(self, job: Job, fn) -> None:
        self.queue.put((job, fn))

    def _loop(self) -> None:
        while True:
            job, fn = self.queue.get()
            self.state.transition(job, "running")
            try:
                fn(job)
            except Exception as exc:
                job.error = str(exc)
                self.state.transition(job, "failed")
            else:
                self.state.transition(job, "done")
            finally:
                self.queue.task_done()


class ServiceState:
    def __init__(
        self,
        config: PipelineConfig,
        workdir: str | None,
        mock_script_path: str | None,
        registry: ModelRegistry | None,
    ):
        self.lock = threading.Lock()
        self.config = config
        self.snapshot: IndexSnapshot | None = None
        self.registry = registry or ModelRegistry()
        self.workdir = pathlib.Path(workdir or "finrag-out/service")
        for sub in ("snapshots", "datasets", "reports"):
            (self.workdir / sub).mkdir(parents=True, exist_ok=True)
        self.trace_path = str(self.workdir / "traces.jsonl")
        self.journal_path = self.workdir / "jobs.jsonl"
        self.mock_script = (
            MockScript.from_file(mock_script_path) if mock_script_path else MockScript()
        )
        self.jobs: dict[str, Job] = {}
        self.idempotency: dict[tuple[str, str], JSONResponse] = {}
        self.workers = {kind: _Worker(self, kind) for kind in JOB_KINDS}
        self._restore()

    # -- construction helpers --------------------------------------------

    def chat_client(self, cfg: PipelineConfig) -> LlmClient:
        if cfg.llm.provider == "mock":
            return MockChatClient(self.mock_script, model=cfg.llm.model)
        return RemoteChatClient(base_url=cfg.llm.provider, model=cfg.llm.model,
                                provider_id="remote")

    def judge_client(self, cfg: PipelineConfig) -> LlmClient:
        if cfg.llm.provider == "mock":
            return MockChatClient(self.mock_script, model=cfg.evaluation.judge_model)
        return RemoteChatClient(base_url=cfg.llm.provider, model=cfg.evaluation.judge_model,
                                provider_id="remote")

    def engine(self) -> QueryEngine:
        with self.lock:
            cfg, snapshot = self.config, self.snapshot
        return QueryEngine(cfg, self.chat_client(cfg), snapshot=snapshot,
                           trace_path=self.trace_path)

    # -- jobs --------------------------------------------------------------

    def create_job(self, kind: str) -> Job:
        job = Job(job_id="job-" + uuid.uuid4().hex[:12], kind=kind)
        self.jobs[job.job_id] = job
        self._journal(job)
        return job

    def transition(self, job: Job, state: str) -> None:
        job.state = state
        self._journal(job)

    def progress(self, job: Job, completed: int, total: int) -> None:
        job.completed, job.total = completed, total

    def _journal(self, job: Job) -> None:
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({**job.to_dict(), "ts": _now()}, sort_keys=True) + "\n")

    def _restore(self) -> None:
        """Reload terminal jobs from the journal and the latest snapshot."""
        if self.journal_path.exists():
            with open(self.journal_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    if entry["state"] in ("done", "failed"):
                        job = Job(
                            job_id=entry["job_id"],
                            kind=entry["kind"],
                            state=entry["state"],
                            completed=entry["progress"]["completed"],
                            total=entry["progress"]["total"],
                            result=entry.get("result") or {},
                            error=entry.get("error"),
                            created_at=entry.get("created_at", ""),
                        )
                        self.jobs[job.job_id] = job
        latest = None
        for job in self.jobs.values():
            if job.kind == "ingest" and job.state == "done" and job.result.get("snapshot_id"):
                latest = job.result["snapshot_id"]
        if latest is not None:
            snap_dir = self.workdir / "snapshots" / latest
            try:
                self.snapshot = load_snapshot(str(snap_dir))
            except SnapshotError:
                self.snapshot = None

    def ingest_active(self) -> bool:
        return any(
            job.kind == "ingest" and job.state in ("queued", "running")
            for job in self.jobs.values()
        )

    # -- stores --------------------------------------------------------------

    def dataset_path(self, dataset_id: str) -> pathlib.Path:
        return self.workdir / "datasets" / f"{dataset_id}.jsonl"

    def report_path(self, report_id: str) -> pathlib.Path:
        return self.workdir / "reports" / f"{report_id}.json"


class QueryBody(BaseModel):
    question: str
    force_rag: bool | None = None


class QaGenBody(BaseModel):
    n: int
    types: list[str] | None = None
    seed: int | None = None


class RetrievalEvalBody(BaseModel):
    dataset_id: str
    retriever_types: list[str] = ["bm25", "vector", "hybrid"]
    ks: list[int] = [3, 5, 10]


class ResponseEvalBody(BaseModel):
    dataset_id: str
    temperatures: list[float] | None = None
    top_ps: list[float] | None = None
    models: list[str] | None = None


def _ok(data, status: int = 200) -> JSONResponse:
    return JSONResponse({"ok": True, "data": data}, status_code=status)


def create_app(
    config: PipelineConfig | None = None,
    workdir: str | None = None,
    mock_script_path: str | None = None,
    registry: ModelRegistry | None = None,
    cors_origins: list[str] | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    state = ServiceState(
        config or config_mod.load_config(""), workdir, mock_script_path, registry
    )
    app = FastAPI(title="finrag service", openapi_url="/api/schema")
    app.state.ctx = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        error: dict = {"message": str(exc)}
        if exc.fieldname:
            error["field"] = exc.fieldname
        return JSONResponse({"ok": False, "error": error}, status_code=exc.status)

    def _config_error(exc: ConfigError) -> ApiError:
        message = str(exc)
        fieldname = None
        if "'" in message:
            fieldname = message.split("'")[1]
        return ApiError(400, message, fieldname)

    def _idempotent(request: Request, response: JSONResponse | None = None) -> JSONResponse | None:
        key = request.headers.get("Idempotency-Key")
        if key is None:
            return response
        cache_key = (request.url.path, key)
        if response is None:
            return state.idempotency.get(cache_key)
        state.idempotency[cache_key] = response
        return response

    # -- config ---------------------------------------------------------------

    @app.get("/config")
    async def get_config():
        with state.lock:
            return _ok(config_mod.to_dict(state.config))

    @app.put("/config")
    async def put_config(request: Request):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        body = await request.json()
        try:
            cfg = config_mod.load_config(json.dumps(body))
        except ConfigError as exc:
            raise _config_error(exc) from exc
        with state.lock:
            state.config = cfg
        return _idempotent(request, _ok(config_mod.to_dict(cfg)))

    @app.patch("/config")
    async def patch_config(request: Request):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        overrides = await request.json()
        if not isinstance(overrides, dict):
            raise ApiError(400, "override set must be a JSON object of dotted paths")
        with state.lock:
            base = state.config
        try:
            cfg = config_mod.apply_overrides(base, overrides)
        except ConfigError as exc:
            raise _config_error(exc) from exc
        with state.lock:
            state.config = cfg
        return _idempotent(request, _ok(config_mod.to_dict(cfg)))

    # -- models -----------------------------------------------------------------

    @app.get("/models")
    async def get_models():
        pairs = [{"provider": p, "model": m} for p, m in state.registry.pairs]
        return _ok(pairs)

    # -- documents / ingest -------------------------------------------------------

    @app.post("/documents")
    async def post_documents(request: Request, files: list[UploadFile]):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        if not files:
            raise ApiError(400, "no files uploaded", "files")
        if state.ingest_active():
            raise ApiError(409, "an ingest job is already running")
        payloads = [(f.filename or "upload.txt", await f.read()) for f in files]
        with state.lock:
            cfg = state.config
        job = state.create_job("ingest")

        def run(job: Job) -> None:
            chunks = []
            state.progress(job, 0, len(payloads) + 1)
            for i, (name, data) in enumerate(payloads):
                doc = load_document(data, name)
                chunks.extend(chunk_document(doc, cfg.ingestion))
                state.progress(job, i + 1, len(payloads) + 1)
            provider = make_provider(
                cfg.ingestion.embedding_provider, cfg.ingestion.embedding_dim,
                cfg.evaluation.seed,
            )
            snapshot = build_snapshot(
                chunks,
                provider,
                chunk_params={
                    "chunk_size_tokens": cfg.ingestion.chunk_size_tokens,
                    "overlap_tokens": cfg.ingestion.overlap_tokens,
                },
            )
            persist(snapshot, str(state.workdir / "snapshots" / snapshot.snapshot_id))
            with state.lock:
                state.snapshot = snapshot
            state.progress(job, len(payloads) + 1, len(payloads) + 1)
            job.result = {"snapshot_id": snapshot.snapshot_id, "chunks": snapshot.N,
                          "documents": len(payloads)}

        state.workers["ingest"].submit(job, run)
        return _idempotent(request, _ok(job.to_dict(), status=202))

    # -- query ---------------------------------------------------------------------

    @app.post("/query")
    async def post_query(request: Request, body: QueryBody):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        if not body.question.strip():
            raise ApiError(400, "question must be non-empty", "question")
        engine = state.engine()
        try:
            record = engine.answer(body.question, force_rag=body.force_rag)
        except GenerationError as exc:
            if "snapshot" in str(exc):
                raise ApiError(400, str(exc)) from exc
            raise ApiError(503, str(exc)) from exc
        except (LlmError, RetrievalError) as exc:
            raise ApiError(503, str(exc)) from exc
        return _idempotent(request, _ok(record.to_dict()))

    # -- qa generation ----------------------------------------------------------------

    @app.post("/qa/generate")
    async def post_qa_generate(request: Request, body: QaGenBody):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        if body.n < 1:
            raise ApiError(400, "n must be >= 1", "n")
        with state.lock:
            cfg, snapshot = state.config, state.snapshot
        if snapshot is None:
            raise ApiError(400, "no snapshot: ingest documents first")
        job = state.create_job("qa_gen")

        def run(job: Job) -> None:
            pairs = generate_qa_pairs(
                snapshot,
                state.chat_client(cfg),
                n=body.n,
                types=set(body.types) if body.types else None,
                seed=body.seed if body.seed is not None else cfg.evaluation.seed,
            )
            content = json.dumps([p.to_dict() for p in pairs], sort_keys=True)
            dataset_id = "ds-" + hashlib.sha256(content.encode()).hexdigest()[:12]
            save_dataset(pairs, str(state.dataset_path(dataset_id)))
            job.result = {"dataset_id": dataset_id, "pairs": len(pairs)}

        state.workers["qa_gen"].submit(job, run)
        return _idempotent(request, _ok(job.to_dict(), status=202))

    # -- evaluation ---------------------------------------------------------------------

    def _require_dataset(dataset_id: str):
        path = state.dataset_path(dataset_id)
        if not path.exists():
            raise ApiError(404, f"unknown dataset id '{dataset_id}'", "dataset_id")
        return load_dataset(str(path))

    @app.post("/eval/retrieval")
    async def post_eval_retrieval(request: Request, body: RetrievalEvalBody):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        dataset = _require_dataset(body.dataset_id)
        with state.lock:
            cfg, snapshot = state.config, state.snapshot
        if snapshot is None:
            raise ApiError(400, "no snapshot: ingest documents first")
        job = state.create_job("retrieval_eval")

        def run(job: Job) -> None:
            report = run_retrieval_grid(
                dataset, snapshot, body.retriever_types, body.ks, cfg,
                progress=lambda done, total: state.progress(job, done, total),
            )
            save_report(report, str(state.report_path(report.report_id)))
            job.result = {"report_id": report.report_id}

        state.workers["retrieval_eval"].submit(job, run)
        return _idempotent(request, _ok(job.to_dict(), status=202))

    @app.post("/eval/responses")
    async def post_eval_responses(request: Request, body: ResponseEvalBody):
        cached = _idempotent(request)
        if cached is not None:
            return cached
        dataset = _require_dataset(body.dataset_id)
        with state.lock:
            cfg, snapshot = state.config, state.snapshot
        if snapshot is None:
            raise ApiError(400, "no snapshot: ingest documents first")
        job = state.create_job("response_eval")

        def run(job: Job) -> None:
            report = run_response_eval(
                dataset, cfg, snapshot,
                llm_factory=state.chat_client,
                judge=state.judge_client(cfg),
                temperatures=body.temperatures,
                top_ps=body.top_ps,
                models=body.models,
                trace_path=state.trace_path,
                progress=lambda done, total: state.progress(job, done, total),
            )
            save_report(report, str(state.report_path(report.report_id)))
            job.result = {"report_id": report.report_id}

        state.workers["response_eval"].submit(job, run)
        return _idempotent(request, _ok(job.to_dict(), status=202))

    # -- jobs and reports -------------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"unknown job id '{job_id}'", "job_id")
        return _ok(job.to_dict())

    @app.get("/reports/{report_id}.csv")
    async def get_report_csv(report_id: str):
        path = state.report_path(report_id)
        if not path.exists():
            raise ApiError(404, f"unknown report id '{report_id}'", "report_id")
        return PlainTextResponse(report_to_csv(load_report(str(path))), media_type="text/csv")

    @app.get("/reports/{report_id}")
    async def get_report(report_id: str):
        path = state.report_path(report_id)
        if not path.exists():
            raise ApiError(404, f"unknown report id '{report_id}'", "report_id")
        return _ok(load_report(str(path)).to_dict())

    @app.get("/snapshot")
    async def get_snapshot():
        with state.lock:
            snapshot = state.snapshot
        if snapshot is None:
            return _ok(None)
        return _ok(
            {
                "snapshot_id": snapshot.snapshot_id,
                "chunks": snapshot.N,
                "dim": snapshot.dim,
                "created_at": snapshot.manifest.get("created_at"),
            }
        )

    static_root = pathlib.Path(static_dir) if static_dir else pathlib.Path("frontend/dist")
    if static_root.is_dir():
        app.mount("/", StaticFiles(directory=str(static_root), html=True), name="ui")

    return app
