/** App shell: tabs, settings sidebar, error banner, initial data load. */
import { Api } from './api.js';
import { renderSidebar } from './controls.js';
import { JobPoller } from './poll.js';
import { Store, UiState } from './state.js';
import { renderAskView } from './views/ask.js';
import { renderEvaluationView } from './views/evaluation.js';
import { renderUploadView } from './views/upload.js';

export interface App {
  api: Api;
  store: Store;
  poller: JobPoller;
  root: HTMLElement;
}

const TABS: { id: UiState['view']; label: string }[] = [
  { id: 'upload', label: 'Upload' },
  { id: 'ask', label: 'Ask' },
  { id: 'evaluation', label: 'Evaluation' },
];

export function createApp(
  root: HTMLElement,
  baseUrl = '',
  pollIntervalMs = 1000,
): App {
  const api = new Api(baseUrl);
  const store = new Store();
  const poller = new JobPoller(api, pollIntervalMs);

  const header = document.createElement('header');
  const title = document.createElement('h1');
  title.textContent = 'finrag';
  header.appendChild(title);
  const nav = document.createElement('nav');
  for (const tab of TABS) {
    const button = document.createElement('button');
    button.textContent = tab.label;
    button.dataset.tab = tab.id;
    button.addEventListener('click', () => {
      poller.cancelAll(); // job polling stops on navigation
      store.set({ view: tab.id });
    });
    nav.appendChild(button);
  }
  header.appendChild(nav);

  const banner = document.createElement('div');
  banner.id = 'error-banner';
  banner.hidden = true;

  const main = document.createElement('main');
  const views: Record<UiState['view'], HTMLElement> = {
    upload: renderUploadView(api, store, poller),
    ask: renderAskView(api, store),
    evaluation: renderEvaluationView(api, store, poller),
  };
  main.append(views.upload, views.ask, views.evaluation);

  const layout = document.createElement('div');
  layout.id = 'layout';
  layout.append(renderSidebar(api, store), main);
  root.replaceChildren(header, banner, layout);

  store.subscribe((state) => {
    for (const tab of TABS) views[tab.id].hidden = state.view !== tab.id;
    for (const button of nav.querySelectorAll('button')) {
      button.classList.toggle('active', button.dataset.tab === state.view);
    }
    banner.hidden = state.error === null;
    banner.textContent = state.error ?? '';
  });
  store.set({ view: 'upload' });

  void Promise.all([api.getConfig(), api.getModels(), api.getSnapshot()])
    .then(([config, models, snapshot]) => store.set({ config, models, snapshot }))
    .catch((err: unknown) =>
      store.set({ error: `service unreachable: ${err instanceof Error ? err.message : err}` }),
    );

  return { api, store, poller, root };
}

declare global {
  interface Window {
    finragApp?: App;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  window.finragApp = createApp(document.getElementById('app')!);
}
