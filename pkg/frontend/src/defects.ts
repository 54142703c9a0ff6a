/** Defect-versus-iteration figure (semilog, threshold line included). */

import { basename } from "path";
import { readDefectCsv } from "./csv";
import { ChartSpec, PALETTE, Series, renderChart } from "./svg";

export const ACCURACY_THRESHOLD = 1.2e-5;
export const STAGNATION_LINE = 1e-5;

const COMPONENTS: Array<[keyof ReturnType<typeof pick>, string]> = [
  ["u", "u"],
  ["v", "v"],
  ["w", "w"],
  ["p", "p"],
];

function pick(row: { defect_u: number; defect_v: number; defect_w: number; defect_p: number }) {
  return { u: row.defect_u, v: row.defect_v, w: row.defect_w, p: row.defect_p };
}

export interface DefectFigureSpec {
  csvPaths: string[];
  showStagnationLine?: boolean;
  title?: string;
}

export function defectFigure(spec: DefectFigureSpec): string {
  if (spec.csvPaths.length === 0) {
    throw new Error("no defect CSVs given");
  }
  const series: Series[] = [];
  let color = 0;
  for (const path of spec.csvPaths) {
    const rows = readDefectCsv(path);
    const tag =
      spec.csvPaths.length > 1 ? `${basename(path).replace(/\.csv$/, "")} ` : "";
    for (const [key, label] of COMPONENTS) {
      const points = rows.map(
        (row) => [row.iteration, pick(row)[key]] as [number, number]
      );
      series.push({
        label: `${tag}defect ${label}`,
        color: PALETTE[color % PALETTE.length],
        points,
        dash: key === "p" ? "4 2" : undefined,
      });
      color += 1;
    }
  }
  const hlines = [
    {
      y: ACCURACY_THRESHOLD,
      label: "fine-solver accuracy",
      color: "#000000",
    },
  ];
  if (spec.showStagnationLine) {
    hlines.push({ y: STAGNATION_LINE, label: "1e-5 level", color: "#888888" });
  }
  const chart: ChartSpec = {
    title: spec.title ?? "Maximum defect vs. time-serial solution",
    xLabel: "Parareal iteration",
    yLabel: "max defect",
    series,
    hlines,
    logY: true,
  };
  return renderChart(chart);
}
