import { describe, expect, it } from "vitest";

import { heatmapCsv, renderHeatmap } from "../src/heatmap.js";
import { parseComparison } from "../src/types.js";
import { loadFixture, syntheticComparison } from "./helpers.js";

describe("renderHeatmap", () => {
  it("renders an all-zero grid as uniform midpoint color with a legend", () => {
    const doc = syntheticComparison(0);
    const { svg } = renderHeatmap(doc);
    // every data cell sits at the white midpoint of the diverging scale
    const cellFills = [...svg.matchAll(/fill="rgb\(255,255,255\)"/g)];
    expect(cellFills.length).toBeGreaterThanOrEqual(9);
    expect(svg).toContain("0%"); // legend midpoint label
    expect(svg).toContain("abstention sensitivity");
    expect(svg).toContain("cost sensitivity");
  });

  it("handles a 1x1 grid", () => {
    const doc = syntheticComparison(-5, 1, 1);
    const { svg, csv } = renderHeatmap(doc);
    expect(svg).toContain("<svg");
    expect(csv.trim().split("\n")).toHaveLength(2);
  });

  it("labels axes with the grid values", () => {
    const doc = syntheticComparison(-5, 2, 2);
    const { svg } = renderHeatmap(doc);
    expect(svg).toContain(">0.01<");
    expect(svg).toContain(">0.02<");
    expect(svg).toContain(">0<");
    expect(svg).toContain(">1<");
  });

  it("companion CSV holds exactly the plotted numbers", () => {
    const doc = parseComparison(loadFixture("comparison_rho08.json"));
    const csv = heatmapCsv(doc);
    const lines = csv.trim().split("\n");
    expect(lines).toHaveLength(doc.grid.lambdas_cost.length + 1);
    const header = lines[0].split(",");
    expect(header.slice(1).map(Number)).toEqual(doc.grid.lambdas_abs);
    for (let i = 0; i < doc.grid.lambdas_cost.length; i++) {
      const row = lines[i + 1].split(",");
      expect(Number(row[0])).toBe(doc.grid.lambdas_cost[i]);
      for (let j = 0; j < doc.grid.lambdas_abs.length; j++) {
        expect(Number(row[j + 1])).toBe(doc.cells[i][j].pct_delta_loss);
      }
    }
  });

  it("is byte-deterministic", () => {
    const doc = parseComparison(loadFixture("comparison_rho08.json"));
    const a = renderHeatmap(doc);
    const b = renderHeatmap(doc);
    expect(a.svg).toBe(b.svg);
    expect(a.csv).toBe(b.csv);
  });

  it("shows the loss improvement concentrated at high cost sensitivity and low abstention penalty", () => {
    // acceptance: sign pattern of the companion CSV on the rho=0.8 sweep
    const doc = parseComparison(loadFixture("comparison_rho08.json"));
    const csv = heatmapCsv(doc);
    const rows = csv
      .trim()
      .split("\n")
      .slice(1)
      .map((line) => line.split(",").slice(1).map(Number));
    const nI = rows.length;
    const nJ = rows[0].length;
    const mean = (vals: number[]) => vals.reduce((a, b) => a + b, 0) / vals.length;
    const target: number[] = []; // high lambda_cost, low lambda_abs
    const opposite: number[] = [];
    for (let i = 0; i < nI; i++) {
      for (let j = 0; j < nJ; j++) {
        if (i >= nI / 2 && j < nJ / 2) target.push(rows[i][j]);
        if (i < nI / 2 && j >= nJ / 2) opposite.push(rows[i][j]);
      }
    }
    expect(mean(target)).toBeLessThan(0);
    expect(mean(target)).toBeLessThan(mean(opposite) - 1.0);
  });
});
