// Heatmap of the per-cell percentage change in cascade loss across the
// user-preference grid, plus a CSV companion holding exactly the plotted
// numbers.

import { ComparisonDoc } from "./types.js";
import { axisLabel, divergingColor, svgDocument, tag, text } from "./svg.js";

export interface HeatmapOutput {
  svg: string;
  csv: string;
}

const CELL = 44;
const MARGIN_LEFT = 86;
const MARGIN_TOP = 46;
const MARGIN_BOTTOM = 64;
const LEGEND_WIDTH = 70;

export function renderHeatmap(doc: ComparisonDoc): HeatmapOutput {
  const { lambdas_cost: lcs, lambdas_abs: las } = doc.grid;
  const values = doc.cells.map((row) => row.map((c) => c.pct_delta_loss));
  const finite = values.flat().filter((v): v is number => v !== null);
  const maxAbs = finite.length ? Math.max(...finite.map(Math.abs)) : 0;

  const width = MARGIN_LEFT + CELL * las.length + LEGEND_WIDTH + 30;
  const height = MARGIN_TOP + CELL * lcs.length + MARGIN_BOTTOM;
  const body: string[] = [];

  body.push(
    text(MARGIN_LEFT, 20, `Change in cascade loss, early vs final abstention (%)`, {
      "font-size": 13,
      "font-weight": "bold",
    })
  );
  if (doc.label) {
    body.push(text(MARGIN_LEFT, 36, `${doc.label} (${doc.basis} basis)`, { fill: "#555" }));
  }

  // rows: lambda_cost bottom-up so cost sensitivity grows upward
  for (let i = 0; i < lcs.length; i++) {
    const y = MARGIN_TOP + CELL * (lcs.length - 1 - i);
    for (let j = 0; j < las.length; j++) {
      const x = MARGIN_LEFT + CELL * j;
      const v = values[i][j];
      body.push(
        tag("rect", {
          x,
          y,
          width: CELL,
          height: CELL,
          fill: v === null ? "rgb(200,200,200)" : divergingColor(v, maxAbs),
          stroke: "#888",
          "stroke-width": 0.5,
        })
      );
      body.push(
        text(x + CELL / 2, y + CELL / 2 + 3, v === null ? "n/a" : v.toFixed(1), {
          "text-anchor": "middle",
          "font-size": 9,
        })
      );
    }
    body.push(
      text(MARGIN_LEFT - 6, y + CELL / 2 + 3, axisLabel(lcs[i]), {
        "text-anchor": "end",
        "font-size": 9,
      })
    );
  }
  for (let j = 0; j < las.length; j++) {
    body.push(
      text(MARGIN_LEFT + CELL * j + CELL / 2, MARGIN_TOP + CELL * lcs.length + 14, axisLabel(las[j]), {
        "text-anchor": "middle",
        "font-size": 9,
      })
    );
  }
  body.push(
    text(MARGIN_LEFT + (CELL * las.length) / 2, height - 22, "abstention sensitivity", {
      "text-anchor": "middle",
    })
  );
  body.push(
    text(16, MARGIN_TOP + (CELL * lcs.length) / 2, "cost sensitivity", {
      "text-anchor": "middle",
      transform: `rotate(-90 16 ${MARGIN_TOP + (CELL * lcs.length) / 2})`,
    })
  );

  // legend: diverging scale centered at zero
  const lx = MARGIN_LEFT + CELL * las.length + 24;
  const lh = CELL * lcs.length;
  const steps = 32;
  for (let s = 0; s < steps; s++) {
    const v = maxAbs - (2 * maxAbs * s) / (steps - 1);
    body.push(
      tag("rect", {
        x: lx,
        y: MARGIN_TOP + (lh * s) / steps,
        width: 14,
        height: lh / steps + 0.5,
        fill: divergingColor(v, maxAbs),
      })
    );
  }
  body.push(tag("rect", { x: lx, y: MARGIN_TOP, width: 14, height: lh, fill: "none", stroke: "#888" }));
  body.push(text(lx + 18, MARGIN_TOP + 8, `+${maxAbs.toFixed(1)}%`, { "font-size": 9 }));
  body.push(text(lx + 18, MARGIN_TOP + lh / 2 + 3, "0%", { "font-size": 9 }));
  body.push(text(lx + 18, MARGIN_TOP + lh, `-${maxAbs.toFixed(1)}%`, { "font-size": 9 }));

  return { svg: svgDocument(width, height, body.join("\n")), csv: heatmapCsv(doc) };
}

/** CSV of exactly the plotted numbers: rows = lambda_cost, cols = lambda_abs. */
export function heatmapCsv(doc: ComparisonDoc): string {
  const { lambdas_cost: lcs, lambdas_abs: las } = doc.grid;
  const lines: string[] = [];
  lines.push(["lambda_cost\\lambda_abs", ...las.map(String)].join(","));
  for (let i = 0; i < lcs.length; i++) {
    const row = doc.cells[i].map((c) =>
      c.pct_delta_loss === null ? "" : String(c.pct_delta_loss)
    );
    lines.push([String(lcs[i]), ...row].join(","));
  }
  return lines.join("\n") + "\n";
}
