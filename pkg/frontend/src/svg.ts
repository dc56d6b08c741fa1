/** Minimal deterministic SVG assembly: attribute-sorted elements, fixed
 * number formatting, no DOM. */

export type Attrs = Record<string, string | number>;

export function fmt(x: number): string {
  if (!Number.isFinite(x)) throw new Error(`non-finite coordinate: ${x}`);
  const rounded = Math.round(x * 100) / 100;
  return Object.is(rounded, -0) ? "0" : String(rounded);
}

export function el(tag: string, attrs: Attrs, children: string[] = []): string {
  const parts = Object.keys(attrs)
    .sort()
    .map((key) => `${key}="${attrs[key]}"`);
  const open = parts.length ? `<${tag} ${parts.join(" ")}>` : `<${tag}>`;
  if (children.length === 0) return open.replace(/>$/, "/>");
  return `${open}${children.join("")}</${tag}>`;
}

export function text(content: string, attrs: Attrs): string {
  const parts = Object.keys(attrs)
    .sort()
    .map((key) => `${key}="${attrs[key]}"`);
  return `<text ${parts.join(" ")}>${content}</text>`;
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    el("rect", { x: 0, y: 0, width, height, fill: "white" }),
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

export interface Scale {
  (x: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((x: number) => r0 + ((x - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

/** Round ticks at 1/2/5 steps covering the domain. */
export function ticks(lo: number, hi: number, count = 6): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const step0 = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step0;
  const step = step0 * (err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1);
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + step / 1e6; v += step) {
    out.push(Math.round(v / step) * step);
  }
  return out;
}
