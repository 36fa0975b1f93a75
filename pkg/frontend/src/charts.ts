/** Dependency-free SVG charts. No aggregation happens here: every point is
 * a server-reported number passed through unchanged. */

const SVG_NS = 'http://www.w3.org/2000/svg';
const WIDTH = 460;
const HEIGHT = 240;
const PAD = 36;
const COLORS = ['#2563eb', '#dc2626', '#059669', '#d97706', '#7c3aed', '#0891b2'];

export interface Series {
  label: string;
  points: { x: number; y: number }[];
}

export interface ScatterPoint {
  x: number;
  y: number;
  label: string;
}

function svgRoot(kind: string): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute('width', String(WIDTH));
  svg.setAttribute('height', String(HEIGHT));
  svg.dataset.chart = kind;
  return svg;
}

function el<K extends string>(tag: K, attrs: Record<string, string | number>): Element {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, String(value));
  return node;
}

function text(x: number, y: number, content: string, anchor = 'middle'): Element {
  const node = el('text', { x, y, 'text-anchor': anchor, 'font-size': 10, fill: '#374151' });
  node.textContent = content;
  return node;
}

function axes(svg: SVGSVGElement, yMax: number): void {
  svg.appendChild(el('line', { x1: PAD, y1: HEIGHT - PAD, x2: WIDTH - 8, y2: HEIGHT - PAD, stroke: '#9ca3af' }));
  svg.appendChild(el('line', { x1: PAD, y1: 8, x2: PAD, y2: HEIGHT - PAD, stroke: '#9ca3af' }));
  for (const frac of [0, 0.5, 1]) {
    const y = HEIGHT - PAD - frac * (HEIGHT - PAD - 12);
    svg.appendChild(text(PAD - 6, y + 3, (yMax * frac).toFixed(2), 'end'));
  }
}

/** Metric-vs-axis line chart, one polyline per series (e.g. NDCG vs k per
 * retriever, or faithfulness vs temperature per model). */
export function lineChart(series: Series[], xLabel: string, yMax = 1): SVGSVGElement {
  const svg = svgRoot('line');
  axes(svg, yMax);
  const xs = [...new Set(series.flatMap((s) => s.points.map((p) => p.x)))].sort((a, b) => a - b);
  if (!xs.length) return svg;
  const xMin = xs[0];
  const xMax = xs[xs.length - 1];
  const toX = (x: number): number =>
    xMax === xMin
      ? (PAD + WIDTH - 8) / 2
      : PAD + ((x - xMin) / (xMax - xMin)) * (WIDTH - PAD - 8 - PAD) + PAD / 2;
  const toY = (y: number): number => HEIGHT - PAD - (y / yMax) * (HEIGHT - PAD - 12);

  for (const x of xs) {
    svg.appendChild(text(toX(x), HEIGHT - PAD + 14, String(x)));
  }
  svg.appendChild(text(WIDTH / 2, HEIGHT - 6, xLabel));

  series.forEach((one, index) => {
    const color = COLORS[index % COLORS.length];
    const coords = one.points
      .slice()
      .sort((a, b) => a.x - b.x)
      .map((p) => `${toX(p.x)},${toY(p.y)}`)
      .join(' ');
    const line = el('polyline', {
      points: coords,
      fill: 'none',
      stroke: color,
      'stroke-width': 2,
    });
    (line as SVGElement).dataset.series = one.label;
    svg.appendChild(line);
    for (const p of one.points) {
      const dot = el('circle', { cx: toX(p.x), cy: toY(p.y), r: 3, fill: color });
      (dot as SVGElement).dataset.series = one.label;
      (dot as SVGElement).dataset.value = String(p.y);
      svg.appendChild(dot);
    }
    svg.appendChild(text(WIDTH - 10, 16 + index * 12, one.label, 'end'));
  });
  return svg;
}

/** One bar per labeled value (metric across grid cells). */
export function barChart(items: { label: string; value: number }[], yMax = 1): SVGSVGElement {
  const svg = svgRoot('bar');
  axes(svg, yMax);
  if (!items.length) return svg;
  const span = WIDTH - PAD - 12;
  const step = span / items.length;
  const barWidth = Math.min(40, step * 0.7);
  items.forEach((item, index) => {
    const x = PAD + index * step + (step - barWidth) / 2;
    const height = (item.value / yMax) * (HEIGHT - PAD - 12);
    const bar = el('rect', {
      x,
      y: HEIGHT - PAD - height,
      width: barWidth,
      height,
      fill: COLORS[index % COLORS.length],
    });
    (bar as SVGElement).dataset.label = item.label;
    (bar as SVGElement).dataset.value = String(item.value);
    svg.appendChild(bar);
    svg.appendChild(text(x + barWidth / 2, HEIGHT - PAD + 14, item.label));
  });
  return svg;
}

/** Faithfulness-vs-relevancy scatter across model configurations. */
export function scatterChart(points: ScatterPoint[]): SVGSVGElement {
  const svg = svgRoot('scatter');
  axes(svg, 1);
  const toX = (x: number): number => PAD + x * (WIDTH - PAD - 12);
  const toY = (y: number): number => HEIGHT - PAD - y * (HEIGHT - PAD - 12);
  points.forEach((p, index) => {
    const dot = el('circle', { cx: toX(p.x), cy: toY(p.y), r: 4, fill: COLORS[index % COLORS.length] });
    (dot as SVGElement).dataset.label = p.label;
    svg.appendChild(dot);
    svg.appendChild(text(toX(p.x), toY(p.y) - 7, p.label));
  });
  svg.appendChild(text(WIDTH / 2, HEIGHT - 6, 'faithfulness'));
  return svg;
}
