import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { ArchMetrics, ComparisonDoc } from "../src/types.js";

const here = path.dirname(fileURLToPath(import.meta.url));

export function loadFixture(name: string): unknown {
  return JSON.parse(fs.readFileSync(path.join(here, "fixtures", name), "utf-8"));
}

export function metrics(loss: number): ArchMetrics {
  return {
    phi: [0.5],
    xi: [0.1, 0.2],
    train_loss: loss,
    error: loss / 2,
    cost: 2.0,
    abstention: 0.1,
  };
}

/** A small synthetic comparison document with a constant %delta grid. */
export function syntheticComparison(
  pct: number,
  nCost = 3,
  nAbs = 3,
  label = "synthetic"
): ComparisonDoc {
  const lcs = Array.from({ length: nCost }, (_, i) => 0.01 * (i + 1));
  const las = Array.from({ length: nAbs }, (_, j) => j / Math.max(nAbs - 1, 1));
  const finalLoss = 0.4;
  const earlyLoss = finalLoss * (1 + pct / 100);
  return {
    label,
    basis: "train",
    grid: { lambdas_cost: lcs, lambdas_abs: las },
    cells: lcs.map((lc) =>
      las.map((la) => ({
        lc,
        la,
        early: metrics(earlyLoss),
        final: metrics(finalLoss),
        pct_delta_loss: pct,
      }))
    ),
    overall: {
      early_loss: earlyLoss,
      final_loss: finalLoss,
      pct_delta_loss: pct,
      early_error: 0.11,
      final_error: 0.13,
      pct_delta_error: -15.385,
      early_cost: 2.5,
      final_cost: 3.0,
      pct_delta_cost: -16.667,
      early_abstention: 0.21,
      final_abstention: 0.17,
      delta_abstention: 0.04,
    },
  };
}
