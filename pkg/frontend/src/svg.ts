// Minimal SVG string builders: deterministic output, no DOM.

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  children = ""
): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : esc(v)}"`)
    .join(" ");
  return children === ""
    ? `<${name} ${parts}/>`
    : `<${name} ${parts}>${children}</${name}>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  attrs: Record<string, string | number> = {}
): string {
  return tag(
    "text",
    { x, y, "font-family": "sans-serif", "font-size": 11, ...attrs },
    esc(content)
  );
}

// fixed-format numbers keep the SVG byte-stable across platforms
export function fmt(v: number): string {
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return String(v);
  return v.toFixed(3).replace(/\.?0+$/, "");
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n` +
    `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}

/** Diverging blue-white-red scale centered at zero. */
export function divergingColor(value: number, maxAbs: number): string {
  if (!Number.isFinite(value)) return "rgb(200,200,200)";
  const t = maxAbs > 0 ? Math.max(-1, Math.min(1, value / maxAbs)) : 0;
  // t=-1 -> blue (improvement), t=0 -> white, t=+1 -> red
  const blend = (from: number, to: number, s: number) =>
    Math.round(from + (to - from) * s);
  if (t < 0) {
    const s = -t;
    return `rgb(${blend(255, 33, s)},${blend(255, 102, s)},${blend(255, 172, s)})`;
  }
  const s = t;
  return `rgb(${blend(255, 178, s)},${blend(255, 24, s)},${blend(255, 43, s)})`;
}

/** Short axis label: scientific for tiny values, fixed otherwise. */
export function axisLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 1000) {
    return String(Number(v.toPrecision(3)));
  }
  return v.toExponential(1).replace("e-", "e-").replace("e+", "e");
}
