/** Evaluation tab: QA generation, retrieval grids, response sweeps, and the
 * report browser with its metrics table and charts. Every number shown is a
 * server-reported value; the table uses the server's own CSV formatting. */
import {
  Api,
  ApiError,
  EvalReport,
  formatCell,
  reportColumns,
} from '../api.js';
import { lineChart, scatterChart, Series } from '../charts.js';
import { JobPoller } from '../poll.js';
import { Store } from '../state.js';

function fail(store: Store, err: unknown): void {
  const message =
    err instanceof ApiError ? err.message : String(err instanceof Error ? err.message : err);
  store.set({ error: message });
}

export async function generateDataset(
  n: number,
  types: string[],
  api: Api,
  store: Store,
  poller: JobPoller,
): Promise<void> {
  try {
    const job = await api.generateQa(n, types);
    const finished = await poller.track(job, (latest) => store.upsertJob(latest));
    if (finished.state === 'failed') {
      store.set({ error: `qa generation failed: ${finished.error}` });
      return;
    }
    const entry = {
      dataset_id: String(finished.result.dataset_id),
      pairs: Number(finished.result.pairs),
    };
    store.set({ datasets: [...store.get().datasets, entry], error: null });
  } catch (err) {
    fail(store, err);
  }
}

export async function runRetrievalGrid(
  datasetId: string,
  retrieverTypes: string[],
  ks: number[],
  api: Api,
  store: Store,
  poller: JobPoller,
): Promise<void> {
  try {
    const job = await api.evalRetrieval(datasetId, retrieverTypes, ks);
    const finished = await poller.track(job, (latest) => store.upsertJob(latest));
    if (finished.state === 'failed') {
      store.set({ error: `retrieval eval failed: ${finished.error}` });
      return;
    }
    const report = await api.getReport(String(finished.result.report_id));
    store.set({
      reports: [...store.get().reports, report],
      selectedReport: report,
      error: null,
    });
  } catch (err) {
    fail(store, err);
  }
}

export async function runResponseSweep(
  datasetId: string,
  sweep: { temperatures?: number[]; top_ps?: number[]; models?: string[] },
  api: Api,
  store: Store,
  poller: JobPoller,
): Promise<void> {
  try {
    const job = await api.evalResponses(datasetId, sweep);
    const finished = await poller.track(job, (latest) => store.upsertJob(latest));
    if (finished.state === 'failed') {
      store.set({ error: `response eval failed: ${finished.error}` });
      return;
    }
    const report = await api.getReport(String(finished.result.report_id));
    store.set({
      reports: [...store.get().reports, report],
      selectedReport: report,
      error: null,
    });
  } catch (err) {
    fail(store, err);
  }
}

/** Metrics table with the server's CSV column order and cell formatting. */
export function renderMetricsTable(report: EvalReport): HTMLTableElement {
  const table = document.createElement('table');
  table.id = 'metrics-table';
  table.dataset.reportId = report.report_id;
  const columns = reportColumns(report);
  const head = document.createElement('tr');
  for (const column of columns) {
    const th = document.createElement('th');
    th.textContent = column;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const cell of report.cells) {
    const row = document.createElement('tr');
    for (const column of columns) {
      const td = document.createElement('td');
      td.dataset.column = column;
      td.textContent = formatCell(column, cell[column]);
      row.appendChild(td);
    }
    table.appendChild(row);
  }
  return table;
}

function retrievalChart(report: EvalReport, metric: string): SVGSVGElement {
  const byType = new Map<string, { x: number; y: number }[]>();
  for (const cell of report.cells) {
    const rtype = String(cell.retriever_type);
    if (!byType.has(rtype)) byType.set(rtype, []);
    byType.get(rtype)!.push({ x: Number(cell.top_k), y: Number(cell[metric]) });
  }
  const series: Series[] = [...byType.entries()].map(([label, points]) => ({ label, points }));
  return lineChart(series, 'top_k');
}

function responseCharts(report: EvalReport, metric: string): SVGSVGElement[] {
  const temps = new Map<string, { x: number; y: number }[]>();
  for (const cell of report.cells) {
    if (cell[metric] === null || cell[metric] === undefined) continue;
    const model = String(cell.model);
    if (!temps.has(model)) temps.set(model, []);
    temps.get(model)!.push({ x: Number(cell.temperature), y: Number(cell[metric]) });
  }
  const sweep = lineChart(
    [...temps.entries()].map(([label, points]) => ({ label, points })),
    'temperature',
  );
  const scatter = scatterChart(
    report.cells
      .filter((c) => c.faithfulness !== null && c.relevancy !== null)
      .map((c) => ({
        x: Number(c.faithfulness),
        y: Number(c.relevancy),
        label: `${String(c.model)}@${String(c.temperature)}`,
      })),
  );
  return [sweep, scatter];
}

export function renderEvaluationView(api: Api, store: Store, poller: JobPoller): HTMLElement {
  const section = document.createElement('section');
  section.id = 'evaluation-view';

  // QA generation form
  const qaForm = document.createElement('form');
  qaForm.id = 'qa-form';
  const qaCount = document.createElement('input');
  qaCount.type = 'number';
  qaCount.id = 'qa-count';
  qaCount.value = '10';
  const qaButton = document.createElement('button');
  qaButton.type = 'submit';
  qaButton.textContent = 'Generate QA pairs';
  qaForm.append(qaCount, qaButton);
  qaForm.addEventListener('submit', (event) => {
    event.preventDefault();
    void generateDataset(Number(qaCount.value), ['factual', 'numerical'], api, store, poller);
  });

  // retrieval grid form
  const gridForm = document.createElement('form');
  gridForm.id = 'grid-form';
  const datasetSelect = document.createElement('select');
  datasetSelect.id = 'dataset-select';
  const typeBoxes: HTMLInputElement[] = [];
  for (const rtype of ['bm25', 'vector', 'hybrid', 'auto_merging']) {
    const label = document.createElement('label');
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.value = rtype;
    box.checked = rtype === 'bm25' || rtype === 'vector';
    box.className = 'retriever-box';
    typeBoxes.push(box);
    label.append(box, document.createTextNode(rtype));
    gridForm.appendChild(label);
  }
  const ksInput = document.createElement('input');
  ksInput.type = 'text';
  ksInput.id = 'ks-input';
  ksInput.value = '3,5';
  const gridButton = document.createElement('button');
  gridButton.type = 'submit';
  gridButton.textContent = 'Run retrieval grid';
  gridForm.append(datasetSelect, ksInput, gridButton);
  gridForm.addEventListener('submit', (event) => {
    event.preventDefault();
    const types = typeBoxes.filter((b) => b.checked).map((b) => b.value);
    const ks = ksInput.value
      .split(',')
      .map((v) => Number(v.trim()))
      .filter((v) => Number.isFinite(v) && v >= 1);
    if (datasetSelect.value && types.length && ks.length) {
      void runRetrievalGrid(datasetSelect.value, types, ks, api, store, poller);
    }
  });

  // response sweep form
  const sweepForm = document.createElement('form');
  sweepForm.id = 'sweep-form';
  const sweepDataset = document.createElement('select');
  sweepDataset.id = 'sweep-dataset-select';
  const tempsInput = document.createElement('input');
  tempsInput.type = 'text';
  tempsInput.id = 'temps-input';
  tempsInput.value = '0.1,0.7';
  const sweepButton = document.createElement('button');
  sweepButton.type = 'submit';
  sweepButton.textContent = 'Run response sweep';
  sweepForm.append(sweepDataset, tempsInput, sweepButton);
  sweepForm.addEventListener('submit', (event) => {
    event.preventDefault();
    const temperatures = tempsInput.value
      .split(',')
      .map((v) => Number(v.trim()))
      .filter((v) => Number.isFinite(v));
    if (sweepDataset.value && temperatures.length) {
      void runResponseSweep(sweepDataset.value, { temperatures }, api, store, poller);
    }
  });

  // report browser
  const browser = document.createElement('div');
  browser.id = 'report-browser';
  const reportSelect = document.createElement('select');
  reportSelect.id = 'report-select';
  reportSelect.addEventListener('change', () => {
    const report = store.get().reports.find((r) => r.report_id === reportSelect.value) ?? null;
    store.set({ selectedReport: report });
  });
  const metricSelect = document.createElement('select');
  metricSelect.id = 'metric-select';
  metricSelect.addEventListener('change', () => store.set({ chartMetric: metricSelect.value }));
  const output = document.createElement('div');
  output.id = 'report-output';
  browser.append(reportSelect, metricSelect, output);

  store.subscribe((state) => {
    const datasetOptions = state.datasets.map((d) => {
      const option = document.createElement('option');
      option.value = d.dataset_id;
      option.textContent = `${d.dataset_id} (${d.pairs} pairs)`;
      return option;
    });
    const keepDataset = datasetSelect.value;
    datasetSelect.replaceChildren(...datasetOptions);
    if (keepDataset) datasetSelect.value = keepDataset;
    const sweepOptions = state.datasets.map((d) => {
      const option = document.createElement('option');
      option.value = d.dataset_id;
      option.textContent = d.dataset_id;
      return option;
    });
    const keepSweep = sweepDataset.value;
    sweepDataset.replaceChildren(...sweepOptions);
    if (keepSweep) sweepDataset.value = keepSweep;

    const reportOptions = state.reports.map((r) => {
      const option = document.createElement('option');
      option.value = r.report_id;
      option.textContent = `${r.report_id} (${r.kind})`;
      return option;
    });
    reportSelect.replaceChildren(...reportOptions);
    if (state.selectedReport) reportSelect.value = state.selectedReport.report_id;

    const report = state.selectedReport;
    const metricChoices =
      report?.kind === 'response'
        ? ['faithfulness', 'relevancy']
        : ['hit_rate', 'mrr', 'precision', 'recall', 'ap', 'ndcg'];
    metricSelect.replaceChildren(
      ...metricChoices.map((name) => {
        const option = document.createElement('option');
        option.value = name;
        option.textContent = name;
        return option;
      }),
    );
    const metric = metricChoices.includes(state.chartMetric) ? state.chartMetric : metricChoices[0];
    metricSelect.value = metric;

    if (!report) {
      output.replaceChildren();
      return;
    }
    const children: (HTMLElement | SVGSVGElement)[] = [renderMetricsTable(report)];
    if (report.kind === 'retrieval') {
      children.push(retrievalChart(report, metric));
    } else {
      children.push(...responseCharts(report, metric));
    }
    output.replaceChildren(...children);
  });

  section.append(qaForm, gridForm, sweepForm, browser);
  return section;
}
