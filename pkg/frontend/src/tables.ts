// Aligned text tables comparing the two abstention architectures, one row
// per comparison document plus an average row. The better (smaller) value
// of each early/final pair is bolded with ** markers. Every number is read
// from the source JSON and printed to 3 decimals.

import { ComparisonDoc } from "./types.js";

const N3 = (v: number): string => v.toFixed(3);

interface Column {
  header: string;
  value: (d: ComparisonDoc) => string;
  average: (ds: ComparisonDoc[]) => string;
}

function mean(vals: number[]): number {
  return vals.reduce((a, b) => a + b, 0) / vals.length;
}

function boldPair(early: number, final: number): [string, string] {
  const e = N3(early);
  const f = N3(final);
  return early <= final ? [`**${e}**`, f] : [e, `**${f}**`];
}

function pct(v: number | null): string {
  return v === null ? "n/a" : N3(v);
}

function pairColumns(
  earlyKey: "early_loss" | "early_error" | "early_cost" | "early_abstention",
  finalKey: "final_loss" | "final_error" | "final_cost" | "final_abstention",
  deltaKey: "pct_delta_loss" | "pct_delta_error" | "pct_delta_cost" | "delta_abstention",
  deltaHeader: string
): Column[] {
  return [
    {
      header: "Early",
      value: (d) => boldPair(d.overall[earlyKey], d.overall[finalKey])[0],
      average: (ds) => {
        const e = mean(ds.map((d) => d.overall[earlyKey]));
        const f = mean(ds.map((d) => d.overall[finalKey]));
        return boldPair(e, f)[0];
      },
    },
    {
      header: "Final",
      value: (d) => boldPair(d.overall[earlyKey], d.overall[finalKey])[1],
      average: (ds) => {
        const e = mean(ds.map((d) => d.overall[earlyKey]));
        const f = mean(ds.map((d) => d.overall[finalKey]));
        return boldPair(e, f)[1];
      },
    },
    {
      header: deltaHeader,
      value: (d) => pct(d.overall[deltaKey]),
      average: (ds) => {
        const vals = ds
          .map((d) => d.overall[deltaKey])
          .filter((v): v is number => v !== null);
        return vals.length ? N3(mean(vals)) : "n/a";
      },
    },
  ];
}

function renderOne(title: string, docs: ComparisonDoc[], columns: Column[]): string {
  const header = ["Cascade", ...columns.map((c) => c.header)];
  const rows = docs.map((d) => [
    d.label || "(unlabeled)",
    ...columns.map((c) => c.value(d)),
  ]);
  if (docs.length > 1) {
    rows.push(["Average", ...columns.map((c) => c.average(docs))]);
  }
  const widths = header.map((h, i) =>
    Math.max(h.length, ...rows.map((r) => r[i].length))
  );
  const fmtRow = (cells: string[]) =>
    cells.map((c, i) => (i === 0 ? c.padEnd(widths[i]) : c.padStart(widths[i]))).join("  ");
  const sep = widths.map((w) => "-".repeat(w)).join("  ");
  return [title, fmtRow(header), sep, ...rows.map(fmtRow)].join("\n");
}

export function renderTables(docs: ComparisonDoc[]): string {
  if (docs.length === 0) {
    throw new Error("renderTables needs at least one comparison document");
  }
  const basis = docs[0].basis;
  const sections = [
    renderOne(
      `Overall cascade loss (${basis} basis)`,
      docs,
      pairColumns("early_loss", "final_loss", "pct_delta_loss", "%D")
    ),
    renderOne(
      "Error rate",
      docs,
      pairColumns("early_error", "final_error", "pct_delta_error", "%D")
    ),
    renderOne(
      "Expected cost",
      docs,
      pairColumns("early_cost", "final_cost", "pct_delta_cost", "%D")
    ),
    renderOne(
      "Abstention rate (delta is an absolute difference)",
      docs,
      pairColumns("early_abstention", "final_abstention", "delta_abstention", "D")
    ),
  ];
  return sections.join("\n\n") + "\n";
}
