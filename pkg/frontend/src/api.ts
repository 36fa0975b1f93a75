/** Typed client for the finrag service API. The server is the single source
 * of truth: this module never computes metrics, it only moves them. */

export interface ConfigTree {
  llm: { provider: string; model: string; temperature: number; top_p: number; max_tokens: number };
  retriever: { type: string; top_k: number; weights: { bm25: number; vector: number } };
  ingestion: {
    chunk_size_tokens: number;
    overlap_tokens: number;
    embedding_provider: string;
    embedding_dim: number;
  };
  prompt: { prompt_type: string; persona: string | null };
  evaluation: {
    faithfulness_threshold: number;
    relevancy_threshold: number;
    judge_model: string;
    seed: number;
  };
  routing: { force_rag: boolean };
}

export interface JobHandle {
  job_id: string;
  kind: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  progress: { completed: number; total: number };
  result: Record<string, unknown>;
  error: string | null;
  created_at: string;
}

export interface RankedHit {
  chunk_id: string;
  score: number;
  rank: number;
  bm25_raw?: number;
  vector_raw?: number;
}

export interface AnswerRecord {
  query_id: string;
  original_query: string;
  enhanced_query: string;
  enhancement_source: string;
  intent: { type: string; needs_retrieval: boolean; entities: string[]; date_refs: string[] };
  routing: { mode: string; reason: string; forced: boolean };
  retriever: Record<string, unknown> | null;
  ranked: { query_id: string; retriever: Record<string, unknown>; hits: RankedHit[] } | null;
  prompt: {
    prompt_type: string;
    persona: string | null;
    rendered_text: string;
    context_chunk_ids: string[];
  };
  completion: { content: string; finish_reason: string; latency_ms: number } | null;
  snapshot_id: string | null;
  error: string | null;
}

export interface EvalReport {
  report_id: string;
  kind: 'retrieval' | 'response';
  config_fingerprint: string;
  snapshot_id: string;
  axes: Record<string, unknown>;
  cells: Record<string, unknown>[];
  per_query: Record<string, unknown>[];
  created_at: string;
}

export interface SnapshotSummary {
  snapshot_id: string;
  chunks: number;
  dim: number;
  created_at: string | null;
}

export interface ModelEntry {
  provider: string;
  model: string;
}

interface Envelope<T> {
  ok: boolean;
  data?: T;
  error?: { message: string; field?: string };
}

export class ApiError extends Error {
  readonly status: number;
  readonly field?: string;

  constructor(status: number, message: string, field?: string) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

export class Api {
  constructor(readonly baseUrl: string = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    let body: Envelope<T>;
    try {
      body = (await resp.json()) as Envelope<T>;
    } catch {
      throw new ApiError(resp.status, `non-JSON response from ${path}`);
    }
    if (!resp.ok || !body.ok) {
      const err = body.error ?? { message: `request to ${path} failed (${resp.status})` };
      throw new ApiError(resp.status, err.message, err.field);
    }
    return body.data as T;
  }

  private json(method: string, payload: unknown): RequestInit {
    return {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    };
  }

  getConfig(): Promise<ConfigTree> {
    return this.request<ConfigTree>('/config');
  }

  putConfig(tree: ConfigTree): Promise<ConfigTree> {
    return this.request<ConfigTree>('/config', this.json('PUT', tree));
  }

  /** Sparse dotted-path overrides; one control change sends exactly one path. */
  patchConfig(overrides: Record<string, unknown>): Promise<ConfigTree> {
    return this.request<ConfigTree>('/config', this.json('PATCH', overrides));
  }

  getModels(): Promise<ModelEntry[]> {
    return this.request<ModelEntry[]>('/models');
  }

  getSnapshot(): Promise<SnapshotSummary | null> {
    return this.request<SnapshotSummary | null>('/snapshot');
  }

  uploadDocuments(files: File[]): Promise<JobHandle> {
    const form = new FormData();
    for (const file of files) form.append('files', file, file.name);
    return this.request<JobHandle>('/documents', { method: 'POST', body: form });
  }

  query(question: string, forceRag?: boolean): Promise<AnswerRecord> {
    const payload: Record<string, unknown> = { question };
    if (forceRag !== undefined) payload.force_rag = forceRag;
    return this.request<AnswerRecord>('/query', this.json('POST', payload));
  }

  generateQa(n: number, types?: string[], seed?: number): Promise<JobHandle> {
    const payload: Record<string, unknown> = { n };
    if (types && types.length) payload.types = types;
    if (seed !== undefined) payload.seed = seed;
    return this.request<JobHandle>('/qa/generate', this.json('POST', payload));
  }

  evalRetrieval(datasetId: string, retrieverTypes: string[], ks: number[]): Promise<JobHandle> {
    return this.request<JobHandle>(
      '/eval/retrieval',
      this.json('POST', { dataset_id: datasetId, retriever_types: retrieverTypes, ks }),
    );
  }

  evalResponses(
    datasetId: string,
    sweep: { temperatures?: number[]; top_ps?: number[]; models?: string[] },
  ): Promise<JobHandle> {
    return this.request<JobHandle>(
      '/eval/responses',
      this.json('POST', { dataset_id: datasetId, ...sweep }),
    );
  }

  getJob(jobId: string): Promise<JobHandle> {
    return this.request<JobHandle>(`/jobs/${jobId}`);
  }

  getReport(reportId: string): Promise<EvalReport> {
    return this.request<EvalReport>(`/reports/${reportId}`);
  }

  async getReportCsv(reportId: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/reports/${reportId}.csv`);
    if (!resp.ok) throw new ApiError(resp.status, `report csv ${reportId} unavailable`);
    return resp.text();
  }
}

export const RETRIEVAL_COLUMNS = [
  'retriever_type',
  'top_k',
  'hit_rate',
  'mrr',
  'precision',
  'recall',
  'ap',
  'ndcg',
] as const;

export const RESPONSE_COLUMNS = [
  'model',
  'temperature',
  'top_p',
  'faithfulness',
  'relevancy',
  'faithfulness_below_threshold',
  'relevancy_below_threshold',
  'failures',
] as const;

const FLOAT_COLUMNS = new Set([
  'hit_rate',
  'mrr',
  'precision',
  'recall',
  'ap',
  'ndcg',
  'temperature',
  'top_p',
  'faithfulness',
  'relevancy',
]);

/** Mirror of the server's CSV cell formatting (floats as 6 decimals). JSON
 * drops the int/float distinction for values like 1.0, so formatting is
 * column-driven; this keeps the rendered table byte-equal to the CSV. */
export function formatCell(column: string, value: unknown): string {
  if (value === null || value === undefined) return '';
  if (FLOAT_COLUMNS.has(column)) return Number(value).toFixed(6);
  if (typeof value === 'boolean') return value ? 'true' : 'false';
  return String(value);
}

export function reportColumns(report: EvalReport): readonly string[] {
  return report.kind === 'retrieval' ? RETRIEVAL_COLUMNS : RESPONSE_COLUMNS;
}
