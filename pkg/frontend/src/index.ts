#!/usr/bin/env node
// CLI: cascade-report <comparison.json|pr.json> [more.json ...] --out dir
//
// Comparison documents produce a heatmap SVG, its companion CSV, and a
// text table; precision-recall documents produce a curve SVG. Passing
// several comparison files builds one combined table with an average row.

import * as fs from "node:fs";
import * as path from "node:path";

import { renderHeatmap } from "./heatmap.js";
import { renderPr } from "./prplot.js";
import { renderTables } from "./tables.js";
import { ComparisonDoc, detectKind, parseComparison, parsePr, SchemaError } from "./types.js";

function usage(): never {
  console.error("usage: cascade-report <input.json> [more.json ...] --out DIR");
  process.exit(2);
}

export function main(argv: string[]): number {
  const inputs: string[] = [];
  let outDir: string | null = null;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--out") {
      outDir = argv[++i];
    } else if (argv[i].startsWith("--")) {
      usage();
    } else {
      inputs.push(argv[i]);
    }
  }
  if (inputs.length === 0 || !outDir) usage();
  fs.mkdirSync(outDir, { recursive: true });

  const comparisons: ComparisonDoc[] = [];
  try {
    for (const input of inputs) {
      const stem = path.basename(input).replace(/\.json$/, "");
      const doc: unknown = JSON.parse(fs.readFileSync(input, "utf-8"));
      if (detectKind(doc) === "pr") {
        const pr = parsePr(doc);
        const svgPath = path.join(outDir, `${stem}.svg`);
        fs.writeFileSync(svgPath, renderPr(pr));
        console.log(`wrote ${svgPath}`);
      } else {
        const cmp = parseComparison(doc);
        comparisons.push(cmp);
        const { svg, csv } = renderHeatmap(cmp);
        const svgPath = path.join(outDir, `${stem}_heatmap.svg`);
        const csvPath = path.join(outDir, `${stem}_heatmap.csv`);
        fs.writeFileSync(svgPath, svg);
        fs.writeFileSync(csvPath, csv);
        console.log(`wrote ${svgPath}`);
        console.log(`wrote ${csvPath}`);
      }
    }
    if (comparisons.length > 0) {
      const tablePath = path.join(outDir, "tables.txt");
      fs.writeFileSync(tablePath, renderTables(comparisons));
      console.log(`wrote ${tablePath}`);
    }
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(String(err.message));
      return 3;
    }
    throw err;
  }
  return 0;
}

const isMain =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
