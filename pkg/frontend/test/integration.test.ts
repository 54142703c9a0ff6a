// End-to-end on real solver output: the fixture CSVs were produced by
// `stns parareal` on a small cavity run and carry the documented schemas.

import { mkdtempSync, readFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { readDefectCsv, readTimingCsv } from "../src/csv";
import { defectFigure } from "../src/defects";
import { speedupFigure } from "../src/speedup";

const FIXTURES = join(__dirname, "fixtures");

describe("real solver output", () => {
  it("parses the recorded defect report", () => {
    const rows = readDefectCsv(join(FIXTURES, "defects_tiny_nt2.csv"));
    expect(rows.map((r) => r.iteration)).toEqual([0, 1, 2]);
    // defects decay monotonically in this run
    expect(rows[1].defect_u).toBeLessThan(rows[0].defect_u);
    expect(rows[2].defect_u).toBeLessThan(rows[1].defect_u);
  });

  it("parses the recorded timing summary", () => {
    const t = readTimingCsv(join(FIXTURES, "timings_tiny_nt2.csv"));
    expect(t.nTime).toBe(2);
    expect(t.serialWall).not.toBeNull();
    expect(t.totalWall).toBeGreaterThan(0);
  });

  it("renders the defect figure with the accuracy threshold", () => {
    const svg = defectFigure({
      csvPaths: [join(FIXTURES, "defects_tiny_nt2.csv")],
    });
    expect(svg).toContain("<svg");
    expect(svg).toContain("fine-solver accuracy");
  });

  it("renders the speedup figure with bound lines", () => {
    const svg = speedupFigure({ dir: FIXTURES });
    expect(svg).toContain("bound 2/2");
  });
});
