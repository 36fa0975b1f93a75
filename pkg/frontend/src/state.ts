/** App state: a mirror of server truth plus UI selections. Every mutation
 * goes through set() so views can re-render from one subscription. */
import type { AnswerRecord, ConfigTree, EvalReport, JobHandle, SnapshotSummary } from './api.js';

export interface UiState {
  config: ConfigTree | null;
  snapshot: SnapshotSummary | null;
  models: { provider: string; model: string }[];
  activeJobs: JobHandle[];
  lastAnswer: AnswerRecord | null;
  datasets: { dataset_id: string; pairs: number }[];
  reports: EvalReport[];
  selectedReport: EvalReport | null;
  chartMetric: string;
  view: 'upload' | 'ask' | 'evaluation';
  error: string | null;
}

export type Listener = (state: UiState) => void;

export class Store {
  private state: UiState = {
    config: null,
    snapshot: null,
    models: [],
    activeJobs: [],
    lastAnswer: null,
    datasets: [],
    reports: [],
    selectedReport: null,
    chartMetric: 'ndcg',
    view: 'upload',
    error: null,
  };
  private listeners: Listener[] = [];

  get(): UiState {
    return this.state;
  }

  set(patch: Partial<UiState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  upsertJob(job: JobHandle): void {
    const others = this.state.activeJobs.filter((j) => j.job_id !== job.job_id);
    const active = job.state === 'queued' || job.state === 'running';
    this.set({ activeJobs: active ? [...others, job] : others });
  }
}
