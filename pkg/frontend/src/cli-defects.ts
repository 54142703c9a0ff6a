#!/usr/bin/env node
/** plot-defects CSV... -o IMG [--stagnation-line] */

import { writeFileSync } from "fs";
import { defectFigure } from "./defects";

function main(argv: string[]): number {
  const csvs: string[] = [];
  let out = "";
  let stagnation = false;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "-o" || arg === "--out") {
      out = argv[++i] ?? "";
    } else if (arg === "--stagnation-line") {
      stagnation = true;
    } else if (arg === "-h" || arg === "--help") {
      console.log("usage: plot-defects CSV... -o IMG [--stagnation-line]");
      return 0;
    } else {
      csvs.push(arg);
    }
  }
  if (!out || csvs.length === 0) {
    console.error("usage: plot-defects CSV... -o IMG [--stagnation-line]");
    return 2;
  }
  try {
    const svg = defectFigure({ csvPaths: csvs, showStagnationLine: stagnation });
    writeFileSync(out, svg);
  } catch (err) {
    console.error(`plot-defects: ${(err as Error).message}`);
    return 1;
  }
  console.log(`wrote ${out}`);
  return 0;
}

process.exitCode = main(process.argv.slice(2));
