/** Settings sidebar: live controls over the pipeline configuration.
 *
 * Each control maps to exactly one dotted config path; changing one control
 * PATCHes exactly that path, and the server's validated response becomes
 * the new config mirror. */
import { Api, ApiError, ConfigTree, ModelEntry } from './api.js';
import { Store } from './state.js';

type Primitive = string | number | boolean | null;

export interface ControlSpec {
  path: string;
  label: string;
  kind: 'slider' | 'number' | 'select' | 'toggle';
  min?: number;
  max?: number;
  step?: number;
  options?: () => { value: string; label: string }[];
  parse?: (raw: string) => Primitive;
  read: (cfg: ConfigTree) => Primitive;
}

export function controlSpecs(models: () => ModelEntry[]): ControlSpec[] {
  return [
    {
      path: 'llm.model',
      label: 'Model',
      kind: 'select',
      options: () => models().map((m) => ({ value: m.model, label: `${m.provider}/${m.model}` })),
      read: (cfg) => cfg.llm.model,
    },
    {
      path: 'llm.temperature',
      label: 'Temperature',
      kind: 'slider',
      min: 0,
      max: 2,
      step: 0.05,
      parse: Number,
      read: (cfg) => cfg.llm.temperature,
    },
    {
      path: 'llm.top_p',
      label: 'Top-p',
      kind: 'slider',
      min: 0.05,
      max: 1,
      step: 0.05,
      parse: Number,
      read: (cfg) => cfg.llm.top_p,
    },
    {
      path: 'retriever.type',
      label: 'Retriever',
      kind: 'select',
      options: () =>
        ['bm25', 'vector', 'hybrid', 'auto_merging'].map((v) => ({ value: v, label: v })),
      read: (cfg) => cfg.retriever.type,
    },
    {
      path: 'retriever.top_k',
      label: 'Top-k',
      kind: 'slider',
      min: 1,
      max: 20,
      step: 1,
      parse: Number,
      read: (cfg) => cfg.retriever.top_k,
    },
    {
      path: 'ingestion.chunk_size_tokens',
      label: 'Chunk size (tokens)',
      kind: 'slider',
      min: 64,
      max: 2048,
      step: 64,
      parse: Number,
      read: (cfg) => cfg.ingestion.chunk_size_tokens,
    },
    {
      path: 'prompt.prompt_type',
      label: 'Prompt type',
      kind: 'select',
      options: () =>
        ['standard', 'few_shot', 'chain_of_thought', 'persona'].map((v) => ({
          value: v,
          label: v,
        })),
      read: (cfg) => cfg.prompt.prompt_type,
    },
    {
      path: 'prompt.persona',
      label: 'Persona',
      kind: 'select',
      options: () => [
        { value: '', label: '(none)' },
        { value: 'financial_advisor', label: 'Financial Advisor' },
        { value: 'risk_analyst', label: 'Risk Analyst' },
      ],
      parse: (raw) => (raw === '' ? null : raw),
      read: (cfg) => cfg.prompt.persona,
    },
    {
      path: 'routing.force_rag',
      label: 'Force RAG Mode',
      kind: 'toggle',
      read: (cfg) => cfg.routing.force_rag,
    },
  ];
}

export function renderControl(
  spec: ControlSpec,
  api: Api,
  store: Store,
): HTMLLabelElement {
  const wrapper = document.createElement('label');
  wrapper.className = 'control';
  wrapper.dataset.path = spec.path;
  const caption = document.createElement('span');
  caption.textContent = spec.label;
  wrapper.appendChild(caption);

  let input: HTMLInputElement | HTMLSelectElement;
  if (spec.kind === 'select') {
    input = document.createElement('select');
    for (const option of spec.options?.() ?? []) {
      const node = document.createElement('option');
      node.value = option.value;
      node.textContent = option.label;
      input.appendChild(node);
    }
  } else {
    input = document.createElement('input');
    if (spec.kind === 'toggle') {
      input.type = 'checkbox';
    } else {
      input.type = spec.kind === 'slider' ? 'range' : 'number';
      if (spec.min !== undefined) input.min = String(spec.min);
      if (spec.max !== undefined) input.max = String(spec.max);
      if (spec.step !== undefined) input.step = String(spec.step);
    }
  }
  input.name = spec.path;

  const readout = document.createElement('span');
  readout.className = 'readout';
  wrapper.appendChild(input);
  wrapper.appendChild(readout);

  const show = (cfg: ConfigTree | null): void => {
    if (!cfg) return;
    const value = spec.read(cfg);
    if (input instanceof HTMLInputElement && input.type === 'checkbox') {
      input.checked = value === true;
    } else {
      input.value = value === null ? '' : String(value);
    }
    readout.textContent = value === null ? '(none)' : String(value);
  };
  show(store.get().config);
  store.subscribe((state) => show(state.config));

  input.addEventListener('change', () => {
    const raw =
      input instanceof HTMLInputElement && input.type === 'checkbox'
        ? input.checked
        : input.value;
    const value: Primitive =
      typeof raw === 'boolean' ? raw : spec.parse ? spec.parse(raw) : raw;
    // exactly one path per control change
    api
      .patchConfig({ [spec.path]: value })
      .then((cfg) => store.set({ config: cfg, error: null }))
      .catch((err: unknown) => {
        const message =
          err instanceof ApiError && err.field
            ? `${err.field}: ${err.message}`
            : String(err instanceof Error ? err.message : err);
        store.set({ error: message });
        show(store.get().config); // revert the control to server truth
      });
  });
  return wrapper;
}

export function renderSidebar(api: Api, store: Store): HTMLElement {
  const aside = document.createElement('aside');
  aside.id = 'settings';
  const heading = document.createElement('h2');
  heading.textContent = 'Settings';
  aside.appendChild(heading);
  for (const spec of controlSpecs(() => store.get().models)) {
    aside.appendChild(renderControl(spec, api, store));
  }
  return aside;
}
