#!/usr/bin/env node
/** plot-speedup DIR -o IMG */

import { writeFileSync } from "fs";
import { speedupFigure } from "./speedup";

function main(argv: string[]): number {
  let dir = "";
  let out = "";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "-o" || arg === "--out") {
      out = argv[++i] ?? "";
    } else if (arg === "-h" || arg === "--help") {
      console.log("usage: plot-speedup DIR -o IMG");
      return 0;
    } else if (!dir) {
      dir = arg;
    } else {
      console.error(`unexpected argument: ${arg}`);
      return 2;
    }
  }
  if (!dir || !out) {
    console.error("usage: plot-speedup DIR -o IMG");
    return 2;
  }
  try {
    const svg = speedupFigure({ dir });
    writeFileSync(out, svg);
  } catch (err) {
    console.error(`plot-speedup: ${(err as Error).message}`);
    return 1;
  }
  console.log(`wrote ${out}`);
  return 0;
}

process.exitCode = main(process.argv.slice(2));
