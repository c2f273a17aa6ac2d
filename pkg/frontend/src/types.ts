// Input schemas for the JSON artifacts produced by the cascade-tuner CLI.
// The renderer never computes metrics: every number it draws or prints is
// read from one of these fields.

export interface ArchMetrics {
  phi: number[];
  xi: number[];
  train_loss: number;
  error: number;
  cost: number;
  abstention: number;
  test?: { loss: number; error: number; cost: number; abstention: number };
}

export interface ComparisonCell {
  lc: number;
  la: number;
  early: ArchMetrics;
  final: ArchMetrics;
  pct_delta_loss: number | null;
}

export interface ComparisonDoc {
  label: string;
  basis: "train" | "test";
  grid: { lambdas_cost: number[]; lambdas_abs: number[] };
  cells: ComparisonCell[][];
  overall: {
    early_loss: number;
    final_loss: number;
    pct_delta_loss: number | null;
    early_error: number;
    final_error: number;
    pct_delta_error: number | null;
    early_cost: number;
    final_cost: number;
    pct_delta_cost: number | null;
    early_abstention: number;
    final_abstention: number;
    delta_abstention: number;
  };
}

export interface PrPoint {
  recall: number;
  precision: number;
  threshold: number;
}

export interface PrDoc {
  baseline: number;
  points: PrPoint[];
  rate?: number;
}

export class SchemaError extends Error {}

function fail(path: string, expected: string): never {
  throw new SchemaError(`schema mismatch at ${path}: expected ${expected}`);
}

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function numArray(v: unknown, path: string): number[] {
  if (!Array.isArray(v) || !v.every(isNum)) fail(path, "an array of numbers");
  return v as number[];
}

function checkMetrics(v: unknown, path: string): ArchMetrics {
  if (typeof v !== "object" || v === null) fail(path, "an object");
  const m = v as Record<string, unknown>;
  numArray(m.phi, `${path}.phi`);
  numArray(m.xi, `${path}.xi`);
  for (const key of ["train_loss", "error", "cost", "abstention"]) {
    if (!isNum(m[key])) fail(`${path}.${key}`, "a number");
  }
  return m as unknown as ArchMetrics;
}

export function parseComparison(doc: unknown): ComparisonDoc {
  if (typeof doc !== "object" || doc === null) fail("$", "an object");
  const d = doc as Record<string, unknown>;
  const grid = d.grid as Record<string, unknown> | undefined;
  if (!grid) fail("$.grid", "an object");
  const lc = numArray(grid.lambdas_cost, "$.grid.lambdas_cost");
  const la = numArray(grid.lambdas_abs, "$.grid.lambdas_abs");
  if (!Array.isArray(d.cells) || d.cells.length !== lc.length) {
    fail("$.cells", `${lc.length} rows (one per lambda_cost)`);
  }
  d.cells.forEach((row, i) => {
    if (!Array.isArray(row) || row.length !== la.length) {
      fail(`$.cells[${i}]`, `${la.length} cells (one per lambda_abs)`);
    }
    row.forEach((cell, j) => {
      const c = cell as Record<string, unknown>;
      if (!isNum(c.lc) || !isNum(c.la)) fail(`$.cells[${i}][${j}]`, "lc/la numbers");
      if (c.pct_delta_loss !== null && !isNum(c.pct_delta_loss)) {
        fail(`$.cells[${i}][${j}].pct_delta_loss`, "a number or null");
      }
      checkMetrics(c.early, `$.cells[${i}][${j}].early`);
      checkMetrics(c.final, `$.cells[${i}][${j}].final`);
    });
  });
  const overall = d.overall as Record<string, unknown> | undefined;
  if (!overall) fail("$.overall", "an object");
  for (const key of [
    "early_loss", "final_loss", "early_error", "final_error",
    "early_cost", "final_cost", "early_abstention", "final_abstention",
    "delta_abstention",
  ]) {
    if (!isNum(overall[key])) fail(`$.overall.${key}`, "a number");
  }
  return d as unknown as ComparisonDoc;
}

export function parsePr(doc: unknown): PrDoc {
  if (typeof doc !== "object" || doc === null) fail("$", "an object");
  const d = doc as Record<string, unknown>;
  if (!isNum(d.baseline) || d.baseline <= 0 || d.baseline >= 1) {
    fail("$.baseline", "a number in (0, 1)");
  }
  if (!Array.isArray(d.points) || d.points.length === 0) {
    fail("$.points", "a nonempty array");
  }
  d.points.forEach((p, i) => {
    const q = p as Record<string, unknown>;
    if (!isNum(q.recall) || !isNum(q.precision)) {
      fail(`$.points[${i}]`, "recall/precision numbers");
    }
  });
  return d as unknown as PrDoc;
}

export function detectKind(doc: unknown): "comparison" | "pr" {
  if (typeof doc === "object" && doc !== null) {
    const d = doc as Record<string, unknown>;
    if ("points" in d && "baseline" in d) return "pr";
    if ("cells" in d && "overall" in d) return "comparison";
  }
  throw new SchemaError(
    "schema mismatch: input is neither a comparison document (cells/overall) " +
      "nor a precision-recall document (points/baseline)"
  );
}
