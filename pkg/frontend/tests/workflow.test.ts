/**
 * Scripted UI session against the real service: jsdom drives the actual app
 * over live HTTP. Uploads two documents, switches the retriever to hybrid,
 * asks a question, launches a 2x2 retrieval grid, and verifies the rendered
 * metrics table cell-for-cell against the server's own CSV export.
 */
import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { JSDOM } from 'jsdom';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { createApp, type App } from '../src/main.js';
import type { UiState } from '../src/state.js';

const PORT = 8991 + Math.floor(Math.random() * 400);
const BASE = `http://127.0.0.1:${PORT}`;

const DOC_A =
  'The alphax level reached 100 million in Q4 2023. ' +
  'Management said the alphax trend would continue. ' +
  'Auditors confirmed the alphax figures.';
const DOC_B =
  'The betax level reached 101 million in Q4 2023. ' +
  'Analysts praised the betax outlook. ' +
  'The betax disclosures were complete.';

function mockScript(): string {
  const lines: Record<string, unknown>[] = [
    { match: 'List every factual claim', response: JSON.stringify(['claim a', 'claim b']) },
    { match: 'decide whether it is supported', response: JSON.stringify([true, true]) },
    { match: 'Rate how well the answer', response: '0.90' },
  ];
  for (const [i, marker] of ['alphax', 'betax'].entries()) {
    lines.push({
      regex: true,
      match: `Read the passage below[\\s\\S]*${marker}`,
      response: JSON.stringify({
        question: `What was the ${marker} level?`,
        answer: `${100 + i} million`,
      }),
    });
    lines.push({
      match: `What was the ${marker} level?`,
      response: `The ${marker} level was ${100 + i} million [1].`,
    });
  }
  lines.push({ default: 'OK.' });
  return lines.map((l) => JSON.stringify(l)).join('\n');
}

let service: ChildProcess;
let app: App;

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/config`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error('service did not come up');
}

async function waitFor<T>(
  probe: () => T | null | undefined | false,
  what: string,
  timeoutMs = 20_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = probe();
    if (value) return value;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`timed out waiting for ${what}: ${JSON.stringify(app?.store.get().error)}`);
}

function state(): UiState {
  return app.store.get();
}

beforeAll(async () => {
  const workdir = mkdtempSync(join(tmpdir(), 'finrag-ui-'));
  const scriptPath = join(workdir, 'script.jsonl');
  writeFileSync(scriptPath, mockScript());
  service = spawn(
    'python3',
    [
      '-m', 'finrag.cli', 'serve',
      '--host', '127.0.0.1',
      '--port', String(PORT),
      '--workdir', join(workdir, 'service'),
      '--mock-script', scriptPath,
    ],
    { stdio: 'ignore' },
  );
  await waitForService();

  const dom = new JSDOM('<!doctype html><html><body><div id="root"></div></body></html>', {
    url: BASE,
  });
  Object.assign(globalThis, {
    document: dom.window.document,
    window: dom.window,
    HTMLInputElement: dom.window.HTMLInputElement,
    HTMLSelectElement: dom.window.HTMLSelectElement,
    HTMLLabelElement: dom.window.HTMLLabelElement,
    Event: dom.window.Event,
    Element: dom.window.Element,
  });
  app = createApp(dom.window.document.getElementById('root') as HTMLElement, BASE, 50);
  await waitFor(() => state().config, 'initial config load');
}, 60_000);

afterAll(() => {
  service?.kill();
});

describe('scripted browser session', () => {
  it('uploads 2 documents and sees the snapshot land', async () => {
    const picker = document.getElementById('file-picker') as HTMLInputElement;
    const files = [
      new File([DOC_A], 'alpha.txt', { type: 'text/plain' }),
      new File([DOC_B], 'beta.txt', { type: 'text/plain' }),
    ];
    Object.defineProperty(picker, 'files', { value: files, configurable: true });
    picker.dispatchEvent(new Event('change'));
    const snapshot = await waitFor(() => state().snapshot, 'snapshot after upload');
    expect(snapshot.chunks).toBeGreaterThanOrEqual(2);
    const status = document.getElementById('snapshot-status')!;
    expect(status.textContent).toContain(snapshot.snapshot_id);
  }, 30_000);

  it('switches the retriever to hybrid through the sidebar', async () => {
    const control = document.querySelector('[data-path="retriever.type"] select') as HTMLSelectElement;
    control.value = 'hybrid';
    control.dispatchEvent(new Event('change'));
    await waitFor(() => state().config?.retriever.type === 'hybrid', 'hybrid config applied');
    const remote = (await fetch(`${BASE}/config`).then((r) => r.json())) as {
      data: { retriever: { type: string } };
    };
    expect(remote.data.retriever.type).toBe('hybrid');
  });

  it('asks a question; the trace shows the hybrid descriptor and per-source scores', async () => {
    const input = document.getElementById('question-input') as HTMLInputElement;
    input.value = 'What was the alphax level?';
    input.form!.dispatchEvent(new Event('submit'));
    const answer = await waitFor(() => state().lastAnswer, 'answer record');
    expect(answer.completion?.content).toBe('The alphax level was 100 million [1].');
    expect(answer.routing.mode).toBe('rag');
    expect((answer.retriever as { type: string }).type).toBe('hybrid');
    const hits = answer.ranked!.hits;
    expect(hits.length).toBeGreaterThan(0);
    expect(
      hits.some((h) => h.bm25_raw !== undefined || h.vector_raw !== undefined),
    ).toBe(true);
    const sources = document.querySelectorAll('#answer .sources li');
    expect(sources.length).toBe(hits.length);
  });

  it('launches a 2x2 retrieval grid and renders a 4-row metrics table equal to the CSV', async () => {
    // generate a dataset first
    const qaCount = document.getElementById('qa-count') as HTMLInputElement;
    qaCount.value = '4';
    qaCount.form!.dispatchEvent(new Event('submit'));
    await waitFor(() => state().datasets.length > 0, 'dataset generated');

    // 2 retrievers x 2 ks
    const boxes = [...document.querySelectorAll('#grid-form .retriever-box')] as HTMLInputElement[];
    for (const box of boxes) box.checked = box.value === 'bm25' || box.value === 'vector';
    const ksInput = document.getElementById('ks-input') as HTMLInputElement;
    ksInput.value = '3,5';
    document.getElementById('grid-form')!.dispatchEvent(new Event('submit'));
    const report = await waitFor(() => state().selectedReport, 'grid report', 30_000);
    expect(report.cells.length).toBe(4);

    const table = document.getElementById('metrics-table')!;
    const rows = [...table.querySelectorAll('tr')];
    expect(rows.length).toBe(5); // header + 4 cells

    const csv = await app.api.getReportCsv(report.report_id);
    const csvLines = csv.trim().split('\n');
    const header = csvLines[0].split(',');
    const headerCells = [...rows[0].querySelectorAll('th')].map((th) => th.textContent);
    expect(headerCells).toEqual(header);
    expect(csvLines.length).toBe(5);
    for (let i = 1; i < csvLines.length; i++) {
      const csvCells = csvLines[i].split(',');
      const tableCells = [...rows[i].querySelectorAll('td')].map((td) => td.textContent);
      expect(tableCells, `row ${i} must equal the CSV byte-for-byte`).toEqual(csvCells);
    }
  }, 45_000);

  it('renders a line chart of the selected metric across k', () => {
    const chart = document.querySelector('#report-output svg[data-chart="line"]');
    expect(chart).not.toBeNull();
    expect(chart!.querySelectorAll('polyline').length).toBe(2); // bm25 + vector
  });
});
