/** Readers for the solver's CSV outputs (defect and timing schemas). */

import { readFileSync } from "fs";

export const DEFECT_COLUMNS = [
  "iteration",
  "defect_u",
  "defect_v",
  "defect_w",
  "defect_p",
  "t_wall_fine",
  "t_wall_coarse",
  "t_wall_update",
] as const;

export interface DefectRow {
  iteration: number;
  defect_u: number;
  defect_v: number;
  defect_w: number;
  defect_p: number;
}

export interface TimingSummary {
  nTime: number;
  nSpace: number;
  nIterations: number;
  serialWall: number | null;
  totalWall: number;
}

function splitCsv(text: string): string[][] {
  return text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0)
    .map((line) => line.split(",").map((cell) => cell.trim()));
}

export function readDefectCsv(path: string): DefectRow[] {
  const rows = splitCsv(readFileSync(path, "utf8"));
  if (rows.length === 0) {
    throw new Error(`${path}: empty defect CSV`);
  }
  const header = rows[0];
  if (header.join(",") !== DEFECT_COLUMNS.join(",")) {
    throw new Error(
      `${path}: unexpected columns [${header.join(", ")}]; ` +
        `expected [${DEFECT_COLUMNS.join(", ")}]`
    );
  }
  if (rows.length === 1) {
    throw new Error(`${path}: defect CSV has no data rows`);
  }
  return rows.slice(1).map((cells, i) => {
    if (cells.length !== DEFECT_COLUMNS.length) {
      throw new Error(`${path}: row ${i + 2} has ${cells.length} cells`);
    }
    const num = (j: number) => {
      const v = Number(cells[j]);
      if (!Number.isFinite(v) && cells[j].toLowerCase() !== "nan") {
        throw new Error(`${path}: row ${i + 2} col ${j + 1}: ${cells[j]}`);
      }
      return v;
    };
    return {
      iteration: num(0),
      defect_u: num(1),
      defect_v: num(2),
      defect_w: num(3),
      defect_p: num(4),
    };
  });
}

export function readTimingCsv(path: string): TimingSummary {
  const rows = splitCsv(readFileSync(path, "utf8"));
  if (rows.length === 0 || rows[0].join(",") !== "rank,phase,seconds") {
    throw new Error(`${path}: not a timing CSV (rank,phase,seconds)`);
  }
  const meta = new Map<string, number>();
  for (const [rank, phase, seconds] of rows.slice(1)) {
    if (Number(rank) < 0) {
      meta.set(phase, Number(seconds));
    }
  }
  const need = (key: string): number => {
    const v = meta.get(key);
    if (v === undefined) {
      throw new Error(`${path}: missing ${key} record`);
    }
    return v;
  };
  return {
    nTime: need("n_time"),
    nSpace: need("n_space"),
    nIterations: need("n_iterations"),
    serialWall: meta.has("serial_wall") ? need("serial_wall") : null,
    totalWall: need("total_wall"),
  };
}
