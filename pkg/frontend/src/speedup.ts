/** Speedup-versus-cores figure with the Parareal bound lines. */

import { readdirSync } from "fs";
import { join } from "path";
import { TimingSummary, readTimingCsv } from "./csv";
import { ChartSpec, PALETTE, Series, renderChart } from "./svg";

export interface SpeedupFigureSpec {
  dir: string;
  title?: string;
}

export function collectTimings(dir: string): TimingSummary[] {
  const files = readdirSync(dir)
    .filter((name) => name.startsWith("timings") && name.endsWith(".csv"))
    .sort();
  if (files.length === 0) {
    throw new Error(`${dir}: no timings*.csv files found`);
  }
  return files.map((name) => readTimingCsv(join(dir, name)));
}

export function speedupFigure(spec: SpeedupFigureSpec): string {
  const entries = collectTimings(spec.dir);
  const withBaseline = entries.filter((e) => e.serialWall !== null);
  if (withBaseline.length === 0) {
    throw new Error(`${spec.dir}: no run records a serial baseline`);
  }

  const byNTime = new Map<number, TimingSummary[]>();
  for (const e of withBaseline) {
    const list = byNTime.get(e.nTime) ?? [];
    list.push(e);
    byNTime.set(e.nTime, list);
  }

  const series: Series[] = [];
  let color = 0;
  const nTimes = [...byNTime.keys()].sort((a, b) => a - b);
  for (const nTime of nTimes) {
    const runs = byNTime
      .get(nTime)!
      .sort((a, b) => a.nSpace - b.nSpace);
    const points = runs.map(
      (e) =>
        [e.nTime * e.nSpace, (e.serialWall as number) / e.totalWall] as [
          number,
          number
        ]
    );
    const label =
      nTime === 1 ? "space-only" : `N_p_time = ${nTime}`;
    const c = PALETTE[color % PALETTE.length];
    series.push({ label, color: c, points });
    if (nTime > 1) {
      // Parareal bound N_p_time / N_it across the same core range
      const nIt = Math.max(1, runs[0].nIterations);
      const bound = nTime / nIt;
      series.push({
        label: `bound ${nTime}/${nIt}`,
        color: c,
        dash: "5 4",
        points: points.map(([x]) => [x, bound] as [number, number]),
      });
    }
    color += 1;
  }

  const chart: ChartSpec = {
    title: spec.title ?? "Total speedup of the space-time parallelization",
    xLabel: "total cores (N_p_time x N_p_space)",
    yLabel: "speedup vs. serial fine run",
    series,
    logY: false,
  };
  return renderChart(chart);
}
