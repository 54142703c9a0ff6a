/** Minimal deterministic SVG line charts (no timestamps, no randomness). */

export interface Series {
  label: string;
  color: string;
  dash?: string;
  points: Array<[number, number]>;
}

export interface HLine {
  y: number;
  label: string;
  color: string;
  dash?: string;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  hlines?: HLine[];
  logY?: boolean;
  width?: number;
  height?: number;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

const MARGIN = { top: 34, right: 24, bottom: 46, left: 64 };

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toPrecision(4);
}

function fmtLog(v: number): string {
  const exp = Math.log10(v);
  if (Number.isInteger(exp)) return `1e${exp}`;
  return v.toExponential(1);
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderChart(spec: ChartSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 440;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of spec.series) {
    for (const [x, y] of s.points) {
      if (Number.isFinite(x)) xs.push(x);
      if (Number.isFinite(y) && (!spec.logY || y > 0)) ys.push(y);
    }
  }
  for (const h of spec.hlines ?? []) {
    if (Number.isFinite(h.y) && (!spec.logY || h.y > 0)) ys.push(h.y);
  }
  if (xs.length === 0 || ys.length === 0) {
    throw new Error("nothing to plot (no finite data points)");
  }

  let xMin = Math.min(...xs);
  let xMax = Math.max(...xs);
  if (xMin === xMax) {
    xMin -= 0.5;
    xMax += 0.5;
  }
  const tY = (v: number) => (spec.logY ? Math.log10(v) : v);
  let yMin = Math.min(...ys.map(tY));
  let yMax = Math.max(...ys.map(tY));
  if (spec.logY) {
    yMin = Math.floor(yMin);
    yMax = Math.ceil(yMax);
    if (yMin === yMax) yMax += 1;
  } else {
    const pad = 0.08 * (yMax - yMin || 1);
    yMin -= pad;
    yMax += pad;
  }

  const px = (x: number) => MARGIN.left + ((x - xMin) / (xMax - xMin)) * plotW;
  const py = (y: number) =>
    MARGIN.top + plotH - ((tY(y) - yMin) / (yMax - yMin)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica, Arial, sans-serif" font-size="12">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">` +
      `${esc(spec.title)}</text>`
  );

  // axes box and ticks
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" ` +
      `height="${plotH}" fill="none" stroke="#333"/>`
  );
  const xTickCount = Math.min(10, Math.max(2, Math.round(xMax - xMin)));
  for (let i = 0; i <= xTickCount; i++) {
    const x = xMin + ((xMax - xMin) * i) / xTickCount;
    const gx = px(x);
    parts.push(
      `<line x1="${gx}" y1="${MARGIN.top + plotH}" x2="${gx}" ` +
        `y2="${MARGIN.top + plotH + 5}" stroke="#333"/>`
    );
    parts.push(
      `<text x="${gx}" y="${MARGIN.top + plotH + 18}" text-anchor="middle">` +
        `${fmt(x)}</text>`
    );
  }
  if (spec.logY) {
    for (let e = Math.ceil(yMin); e <= Math.floor(yMax); e++) {
      const gy = py(10 ** e);
      parts.push(
        `<line x1="${MARGIN.left}" y1="${gy}" ` +
          `x2="${MARGIN.left + plotW}" y2="${gy}" stroke="#eee"/>`
      );
      parts.push(
        `<text x="${MARGIN.left - 6}" y="${gy + 4}" text-anchor="end">` +
          `1e${e}</text>`
      );
    }
  } else {
    const yTicks = 6;
    for (let i = 0; i <= yTicks; i++) {
      const y = yMin + ((yMax - yMin) * i) / yTicks;
      const gy = MARGIN.top + plotH - (plotH * i) / yTicks;
      parts.push(
        `<line x1="${MARGIN.left}" y1="${gy}" ` +
          `x2="${MARGIN.left + plotW}" y2="${gy}" stroke="#eee"/>`
      );
      parts.push(
        `<text x="${MARGIN.left - 6}" y="${gy + 4}" text-anchor="end">` +
          `${fmt(y)}</text>`
      );
    }
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 10}" ` +
      `text-anchor="middle">${esc(spec.xLabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">` +
      `${esc(spec.yLabel)}</text>`
  );

  for (const h of spec.hlines ?? []) {
    if (spec.logY && h.y <= 0) continue;
    const gy = py(h.y);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${gy}" x2="${MARGIN.left + plotW}" ` +
        `y2="${gy}" stroke="${h.color}" stroke-dasharray="${h.dash ?? "6 3"}"/>`
    );
    parts.push(
      `<text x="${MARGIN.left + plotW - 4}" y="${gy - 4}" text-anchor="end" ` +
        `fill="${h.color}">${esc(h.label)} (${fmtLog(h.y)})</text>`
    );
  }

  for (const s of spec.series) {
    const pts = s.points
      .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y) &&
        (!spec.logY || y > 0))
      .map(([x, y]) => `${px(x).toFixed(2)},${py(y).toFixed(2)}`)
      .join(" ");
    if (!pts) continue;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" ` +
        `stroke-width="1.8"${dash}/>`
    );
    for (const [x, y] of s.points) {
      if (!Number.isFinite(y) || (spec.logY && y <= 0)) continue;
      parts.push(
        `<circle cx="${px(x).toFixed(2)}" cy="${py(y).toFixed(2)}" r="3" ` +
          `fill="${s.color}"/>`
      );
    }
  }

  // legend
  let ly = MARGIN.top + 8;
  for (const s of spec.series) {
    const lx = MARGIN.left + 10;
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" ` +
        `stroke="${s.color}" stroke-width="2"` +
        (s.dash ? ` stroke-dasharray="${s.dash}"` : "") + `/>`
    );
    parts.push(
      `<text x="${lx + 28}" y="${ly + 4}">${esc(s.label)}</text>`
    );
    ly += 16;
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
