/** Upload view: drag-drop or file picker -> POST /documents -> job progress. */
import { Api, ApiError } from '../api.js';
import { JobPoller } from '../poll.js';
import { Store } from '../state.js';

export function uploadFiles(
  files: File[],
  api: Api,
  store: Store,
  poller: JobPoller,
): Promise<void> {
  if (!files.length) return Promise.resolve();
  return api
    .uploadDocuments(files)
    .then((job) =>
      poller.track(job, (latest) => store.upsertJob(latest)).then(async (finished) => {
        if (finished.state === 'failed') {
          store.set({ error: `ingest failed: ${finished.error}` });
          return;
        }
        store.set({ snapshot: await api.getSnapshot(), error: null });
      }),
    )
    .catch((err: unknown) => {
      const message =
        err instanceof ApiError ? err.message : String(err instanceof Error ? err.message : err);
      store.set({ error: message });
    });
}

export function renderUploadView(api: Api, store: Store, poller: JobPoller): HTMLElement {
  const section = document.createElement('section');
  section.id = 'upload-view';

  const drop = document.createElement('div');
  drop.className = 'dropzone';
  drop.textContent = 'Drop financial reports here (.pdf, .txt, .docx, .md) or use the picker';
  const picker = document.createElement('input');
  picker.type = 'file';
  picker.multiple = true;
  picker.id = 'file-picker';

  const start = (files: File[]): void => {
    void uploadFiles(files, api, store, poller);
  };
  picker.addEventListener('change', () => start(Array.from(picker.files ?? [])));
  drop.addEventListener('dragover', (event) => event.preventDefault());
  drop.addEventListener('drop', (event) => {
    event.preventDefault();
    start(Array.from(event.dataTransfer?.files ?? []));
  });

  const status = document.createElement('div');
  status.id = 'snapshot-status';
  const jobs = document.createElement('div');
  jobs.id = 'job-progress';

  store.subscribe((state) => {
    status.textContent = state.snapshot
      ? `snapshot ${state.snapshot.snapshot_id} — ${state.snapshot.chunks} chunks indexed`
      : 'no snapshot yet — upload documents to build one';
    jobs.replaceChildren(
      ...state.activeJobs.map((job) => {
        const row = document.createElement('div');
        row.className = 'job-row';
        row.textContent = `${job.kind} ${job.state} (${job.progress.completed}/${job.progress.total})`;
        return row;
      }),
    );
  });

  section.append(drop, picker, status, jobs);
  return section;
}
