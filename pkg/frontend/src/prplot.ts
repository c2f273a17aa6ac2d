// Precision-recall curve for abstention prediction, with the random
// baseline (the final model's abstention rate) as a dashed line.

import { PrDoc } from "./types.js";
import { svgDocument, tag, text, fmt } from "./svg.js";

const W = 420;
const H = 360;
const ML = 54;
const MR = 16;
const MT = 40;
const MB = 48;

export function renderPr(doc: PrDoc): string {
  const plotW = W - ML - MR;
  const plotH = H - MT - MB;
  const px = (recall: number) => ML + recall * plotW;
  const py = (precision: number) => MT + (1 - precision) * plotH;

  const body: string[] = [];
  const title =
    doc.rate !== undefined
      ? `Abstention prediction, ${Math.round(doc.rate * 100)}% abstention rate`
      : "Abstention prediction";
  body.push(text(ML, 20, title, { "font-size": 13, "font-weight": "bold" }));

  // frame and ticks
  body.push(
    tag("rect", { x: ML, y: MT, width: plotW, height: plotH, fill: "none", stroke: "#333" })
  );
  for (let i = 0; i <= 5; i++) {
    const v = i / 5;
    body.push(
      tag("line", { x1: px(v), y1: MT + plotH, x2: px(v), y2: MT + plotH + 4, stroke: "#333" })
    );
    body.push(text(px(v), MT + plotH + 16, fmt(v), { "text-anchor": "middle", "font-size": 9 }));
    body.push(tag("line", { x1: ML - 4, y1: py(v), x2: ML, y2: py(v), stroke: "#333" }));
    body.push(text(ML - 7, py(v) + 3, fmt(v), { "text-anchor": "end", "font-size": 9 }));
  }
  body.push(text(ML + plotW / 2, H - 14, "recall", { "text-anchor": "middle" }));
  body.push(
    text(16, MT + plotH / 2, "precision", {
      "text-anchor": "middle",
      transform: `rotate(-90 16 ${MT + plotH / 2})`,
    })
  );

  // random baseline: dashed gray horizontal line at the abstention rate
  body.push(
    tag("line", {
      x1: ML,
      y1: py(doc.baseline),
      x2: ML + plotW,
      y2: py(doc.baseline),
      stroke: "#999",
      "stroke-dasharray": "6 4",
      "stroke-width": 1.5,
    })
  );
  body.push(
    text(ML + plotW - 4, py(doc.baseline) - 5, `baseline ${fmt(doc.baseline)}`, {
      "text-anchor": "end",
      fill: "#777",
      "font-size": 9,
    })
  );

  const pts = doc.points
    .map((p) => `${fmt(px(p.recall))},${fmt(py(p.precision))}`)
    .join(" ");
  body.push(
    tag("polyline", { points: pts, fill: "none", stroke: "rgb(33,102,172)", "stroke-width": 1.8 })
  );

  return svgDocument(W, H, body.join("\n"));
}
