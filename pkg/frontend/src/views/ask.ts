/** Ask view: question box -> POST /query -> answer, sources, routing, trace. */
import { AnswerRecord, Api, ApiError } from '../api.js';
import { Store } from '../state.js';

export function askQuestion(question: string, api: Api, store: Store): Promise<void> {
  return api
    .query(question)
    .then((record) => store.set({ lastAnswer: record, error: null }))
    .catch((err: unknown) => {
      const message =
        err instanceof ApiError ? err.message : String(err instanceof Error ? err.message : err);
      store.set({ error: message });
    });
}

function renderAnswer(record: AnswerRecord): HTMLElement {
  const box = document.createElement('div');
  box.id = 'answer';

  const answer = document.createElement('p');
  answer.className = 'answer-text';
  answer.textContent = record.completion?.content ?? '(no completion)';
  box.appendChild(answer);

  const routing = document.createElement('p');
  routing.className = 'routing';
  routing.textContent = `${record.routing.mode} — ${record.routing.reason}`;
  if (record.routing.forced) {
    const badge = document.createElement('span');
    badge.className = 'badge forced';
    badge.textContent = 'forced RAG';
    routing.appendChild(badge);
  }
  box.appendChild(routing);

  if (record.retriever) {
    const descriptor = document.createElement('p');
    descriptor.className = 'retriever-descriptor';
    descriptor.textContent = `retriever: ${JSON.stringify(record.retriever)}`;
    box.appendChild(descriptor);
  }

  if (record.ranked) {
    const list = document.createElement('ol');
    list.className = 'sources';
    for (const hit of record.ranked.hits) {
      const item = document.createElement('li');
      item.dataset.chunkId = hit.chunk_id;
      const sources: string[] = [];
      if (hit.bm25_raw !== undefined && hit.bm25_raw !== null)
        sources.push(`bm25=${hit.bm25_raw.toFixed(4)}`);
      if (hit.vector_raw !== undefined && hit.vector_raw !== null)
        sources.push(`vector=${hit.vector_raw.toFixed(4)}`);
      item.textContent = `[${hit.rank}] ${hit.chunk_id} score=${hit.score.toFixed(4)}${
        sources.length ? ` (${sources.join(', ')})` : ''
      }`;
      list.appendChild(item);
    }
    box.appendChild(list);
  }

  const trace = document.createElement('details');
  trace.className = 'trace';
  const summary = document.createElement('summary');
  summary.textContent = 'full trace';
  trace.appendChild(summary);
  const pre = document.createElement('pre');
  pre.textContent = JSON.stringify(record, null, 2);
  trace.appendChild(pre);
  box.appendChild(trace);
  return box;
}

export function renderAskView(api: Api, store: Store): HTMLElement {
  const section = document.createElement('section');
  section.id = 'ask-view';

  const form = document.createElement('form');
  const input = document.createElement('input');
  input.type = 'text';
  input.id = 'question-input';
  input.placeholder = "e.g. What was Nvidia's net income in Q4 2023?";
  const button = document.createElement('button');
  button.type = 'submit';
  button.textContent = 'Ask';
  form.append(input, button);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (input.value.trim()) void askQuestion(input.value.trim(), api, store);
  });

  const output = document.createElement('div');
  store.subscribe((state) => {
    output.replaceChildren(...(state.lastAnswer ? [renderAnswer(state.lastAnswer)] : []));
  });

  section.append(form, output);
  return section;
}
