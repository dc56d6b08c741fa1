/**
 * Figure builders over the sweep CSV schema: a phase diagram of the order
 * parameter against the noise level with certified regions shaded, decay
 * curves against the analytic envelope, and conditional-mixing heatmaps.
 * One figure per invocation; inputs are never modified and identical inputs
 * produce identical bytes.
 */

import { readFileSync, writeFileSync } from "fs";

import { EmptyCsvError, SchemaError, SweepRow, parseSweepCsv } from "./schema.js";
import { Scale, document as svgDocument, el, fmt, linearScale, text, ticks } from "./svg.js";

export type FigureKind = "phase-diagram" | "decay-curve" | "crf-heatmap";

export interface Thresholds {
  low?: number; // instability certified for p below this
  high?: number; // stability certified for p above this
}

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  output: string;
  certInputs?: string[];
  thresholds?: Thresholds;
  title?: string;
}

const WIDTH = 760;
const HEIGHT = 480;
const MARGIN = { left: 70, right: 30, top: 40, bottom: 55 };

function plotArea(): { x: [number, number]; y: [number, number] } {
  return {
    x: [MARGIN.left, WIDTH - MARGIN.right],
    y: [HEIGHT - MARGIN.bottom, MARGIN.top],
  };
}

function axes(xs: Scale, ys: Scale, xLabel: string, yLabel: string, yTickLabels: [number, string][]): string[] {
  const [x0, x1] = xs.range;
  const [y0, y1] = ys.range;
  const parts = [
    el("line", { class: "axis", x1: x0, x2: x1, y1: y0, y2: y0, stroke: "black" }),
    el("line", { class: "axis", x1: x0, x2: x0, y1: y0, y2: y1, stroke: "black" }),
    text(xLabel, { x: (x0 + x1) / 2, y: HEIGHT - 12, "text-anchor": "middle", "font-size": 14 }),
    text(yLabel, {
      x: 16,
      y: (y0 + y1) / 2,
      "text-anchor": "middle",
      "font-size": 14,
      transform: `rotate(-90 16 ${fmt((y0 + y1) / 2)})`,
    }),
  ];
  for (const v of ticks(xs.domain[0], xs.domain[1])) {
    const px = xs(v);
    parts.push(el("line", { class: "tick", x1: px, x2: px, y1: y0, y2: y0 + 5, stroke: "black" }));
    parts.push(text(String(Number(v.toPrecision(6))), { x: px, y: y0 + 20, "text-anchor": "middle", "font-size": 11 }));
  }
  for (const [v, label] of yTickLabels) {
    const py = ys(v);
    parts.push(el("line", { class: "tick", x1: x0 - 5, x2: x0, y1: py, y2: py, stroke: "black" }));
    parts.push(text(label, { x: x0 - 9, y: py + 4, "text-anchor": "end", "font-size": 11 }));
  }
  return parts;
}

function readRows(paths: string[]): SweepRow[] {
  const rows: SweepRow[] = [];
  for (const path of paths) {
    rows.push(...parseSweepCsv(readFileSync(path, "utf8"), path));
  }
  return rows;
}

/** Certified-phase boundaries read off certificate sweep CSVs: the largest
 * noise level the instability certificate covers and the smallest the
 * stability certificate covers. */
export function thresholdsFromCerts(rows: SweepRow[]): Thresholds {
  const out: Thresholds = {};
  const holding = rows.filter((r) => r.cert_holds === true && r.p !== null);
  const low = holding.filter((r) => r.experiment === "peierls-cert").map((r) => r.p as number);
  const high = holding.filter((r) => r.experiment === "dobrushin-cert").map((r) => r.p as number);
  if (low.length) out.low = Math.max(...low);
  if (high.length) out.high = Math.min(...high);
  return out;
}

function phaseDiagram(rows: SweepRow[], thresholds: Thresholds, title?: string): string {
  const data = rows
    .filter((r) => r.p !== null && r.estimate !== null)
    .sort((a, b) => (a.p as number) - (b.p as number));
  if (data.length === 0) throw new SchemaError("phase diagram needs p and estimate columns filled");
  const area = plotArea();
  const xs = linearScale([0, 0.5], area.x);
  const maxY = Math.max(1, ...data.map((r) => (r.estimate as number) + (r.std_error ?? 0)));
  const ys = linearScale([0, maxY], area.y);
  const body: string[] = [];
  if (thresholds.low !== undefined) {
    body.push(
      el("rect", {
        class: "cert-region cert-region-low",
        x: fmt(xs(0)),
        y: fmt(area.y[1]),
        width: fmt(Math.max(xs(thresholds.low) - xs(0), 0.5)),
        height: fmt(area.y[0] - area.y[1]),
        fill: "#f4c7c3",
        opacity: 0.6,
      }),
    );
  }
  if (thresholds.high !== undefined) {
    body.push(
      el("rect", {
        class: "cert-region cert-region-high",
        x: fmt(xs(thresholds.high)),
        y: fmt(area.y[1]),
        width: fmt(xs(0.5) - xs(thresholds.high)),
        height: fmt(area.y[0] - area.y[1]),
        fill: "#c3d7f4",
        opacity: 0.6,
      }),
    );
  }
  body.push(...axes(xs, ys, "noise level p", "order parameter", ticks(0, maxY).map((v) => [v, String(Number(v.toPrecision(4)))])));
  for (const [key, value] of Object.entries(thresholds)) {
    if (value === undefined) continue;
    const px = xs(value);
    body.push(
      el("line", {
        class: `threshold-line threshold-${key}`,
        "data-threshold": value,
        x1: fmt(px),
        x2: fmt(px),
        y1: area.y[0],
        y2: area.y[1],
        stroke: key === "low" ? "#a33" : "#36c",
        "stroke-dasharray": "6 3",
      }),
    );
    body.push(
      text(key === "low" ? "instability certified" : "stability certified", {
        class: "threshold-label",
        x: px + (key === "low" ? 6 : -6),
        y: area.y[1] + 14,
        "text-anchor": key === "low" ? "start" : "end",
        "font-size": 11,
        fill: key === "low" ? "#a33" : "#36c",
      }),
    );
  }
  const line = data.map((r) => `${fmt(xs(r.p as number))},${fmt(ys(r.estimate as number))}`).join(" ");
  body.push(el("polyline", { class: "data-line", points: line, fill: "none", stroke: "#222", "stroke-width": 1.5 }));
  for (const r of data) {
    const px = xs(r.p as number);
    const py = ys(r.estimate as number);
    if (r.std_error !== null && r.std_error > 0) {
      body.push(
        el("line", {
          class: "error-bar",
          x1: fmt(px),
          x2: fmt(px),
          y1: fmt(ys((r.estimate as number) - r.std_error)),
          y2: fmt(ys((r.estimate as number) + r.std_error)),
          stroke: "#222",
        }),
      );
    }
    body.push(el("circle", { class: "data-point", cx: fmt(px), cy: fmt(py), r: 3, fill: "#222", "data-p": r.p as number }));
  }
  if (title) body.push(text(title, { x: WIDTH / 2, y: 22, "text-anchor": "middle", "font-size": 15 }));
  return svgDocument(WIDTH, HEIGHT, body);
}

function decayCurve(rows: SweepRow[], title?: string): string {
  const data = rows
    .filter((r) => r.k !== null && r.estimate !== null && r.m !== null)
    .sort((a, b) => (a.k as number) - (b.k as number));
  if (data.length === 0) throw new SchemaError("decay curve needs k, m and estimate columns filled");
  const m = data[0].m as number;
  const envelope = (k: number) => (8 * m + 4) * Math.exp(-k);
  const kMax = Math.max(...data.map((r) => r.k as number));
  const floor = Math.min(...data.map((r) => Math.max(r.estimate as number, 1e-12)));
  const yLo = Math.log10(floor) - 0.5;
  const yHi = Math.log10(Math.max(envelope(1), 1)) + 0.3;
  const area = plotArea();
  const xs = linearScale([0, kMax + 0.5], area.x);
  const ys = linearScale([yLo, yHi], area.y);
  const yTicks: [number, string][] = [];
  for (let e = Math.ceil(yLo); e <= Math.floor(yHi); e += 1) {
    yTicks.push([e, `1e${e}`]);
  }
  const body = [...axes(xs, ys, "horizon k", "gap (log scale)", yTicks)];
  const envPts: string[] = [];
  for (let k = 1; k <= kMax + 0.5; k += 0.25) {
    envPts.push(`${fmt(xs(k))},${fmt(ys(Math.log10(envelope(k))))}`);
  }
  body.push(
    el("polyline", {
      class: "envelope",
      "data-m": m,
      points: envPts.join(" "),
      fill: "none",
      stroke: "#a33",
      "stroke-width": 1.5,
      "stroke-dasharray": "5 3",
    }),
  );
  for (const r of data) {
    const px = xs(r.k as number);
    const py = ys(Math.log10(Math.max(r.estimate as number, 1e-12)));
    if (r.std_error !== null && r.std_error > 0) {
      const hi = (r.estimate as number) + r.std_error;
      const lo = Math.max((r.estimate as number) - r.std_error, 1e-12);
      body.push(
        el("line", {
          class: "error-bar",
          x1: fmt(px),
          x2: fmt(px),
          y1: fmt(ys(Math.log10(lo))),
          y2: fmt(ys(Math.log10(hi))),
          stroke: "#222",
        }),
      );
    }
    body.push(
      el("circle", {
        class: "data-point",
        cx: fmt(px),
        cy: fmt(py),
        r: 3,
        fill: "#222",
        "data-k": r.k as number,
        "data-estimate": r.estimate as number,
      }),
    );
  }
  body.push(
    text(`analytic envelope (8m+4)e^-k, m=${m}`, {
      class: "envelope-label",
      x: area.x[1] - 6,
      y: area.y[1] + 14,
      "text-anchor": "end",
      "font-size": 11,
      fill: "#a33",
    }),
  );
  if (title) body.push(text(title, { x: WIDTH / 2, y: 22, "text-anchor": "middle", "font-size": 15 }));
  return svgDocument(WIDTH, HEIGHT, body);
}

function heatColor(t: number): string {
  // two-stop interpolation, dark blue to warm yellow
  const c0 = [40, 60, 120];
  const c1 = [250, 220, 90];
  const mix = c0.map((v, i) => Math.round(v + (c1[i] - v) * t));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

function heatmap(rows: SweepRow[], title?: string): string {
  const data = rows.filter((r) => r.p !== null && r.estimate !== null && r.box !== "");
  if (data.length === 0) throw new SchemaError("heatmap needs p, box and estimate columns filled");
  const ps = [...new Set(data.map((r) => r.p as number))].sort((a, b) => a - b);
  const boxes = [...new Set(data.map((r) => r.box))].sort();
  const area = plotArea();
  const cellW = (area.x[1] - area.x[0]) / ps.length;
  const cellH = (area.y[0] - area.y[1]) / boxes.length;
  const values = data.map((r) => r.estimate as number);
  const vMin = Math.min(...values);
  const vMax = Math.max(...values);
  const span = vMax - vMin || 1;
  const body: string[] = [];
  for (const r of data) {
    const xi = ps.indexOf(r.p as number);
    const yi = boxes.indexOf(r.box);
    const v = r.estimate as number;
    const x = area.x[0] + xi * cellW;
    const y = area.y[1] + yi * cellH;
    body.push(
      el("rect", {
        class: "cell",
        x: fmt(x),
        y: fmt(y),
        width: fmt(cellW),
        height: fmt(cellH),
        fill: heatColor((v - vMin) / span),
        "data-p": r.p as number,
        "data-box": r.box,
        "data-value": v,
        stroke: "white",
      }),
    );
    body.push(
      text(Number(v.toPrecision(3)).toString(), {
        class: "cell-label",
        x: fmt(x + cellW / 2),
        y: fmt(y + cellH / 2 + 4),
        "text-anchor": "middle",
        "font-size": 11,
        fill: (v - vMin) / span > 0.55 ? "#333" : "#eee",
      }),
    );
  }
  ps.forEach((p, xi) => {
    body.push(
      text(String(p), {
        x: fmt(area.x[0] + (xi + 0.5) * cellW),
        y: area.y[0] + 20,
        "text-anchor": "middle",
        "font-size": 11,
      }),
    );
  });
  boxes.forEach((b, yi) => {
    body.push(
      text(b, {
        x: area.x[0] - 9,
        y: fmt(area.y[1] + (yi + 0.5) * cellH + 4),
        "text-anchor": "end",
        "font-size": 11,
      }),
    );
  });
  body.push(text("noise level p", { x: (area.x[0] + area.x[1]) / 2, y: HEIGHT - 12, "text-anchor": "middle", "font-size": 14 }));
  if (title) body.push(text(title, { x: WIDTH / 2, y: 22, "text-anchor": "middle", "font-size": 15 }));
  return svgDocument(WIDTH, HEIGHT, body);
}

/** Build the figure string without touching the filesystem output. */
export function buildFigure(spec: FigureSpec): string {
  const rows = readRows(spec.inputs);
  if (spec.kind === "phase-diagram") {
    const fromCerts = spec.certInputs?.length ? thresholdsFromCerts(readRows(spec.certInputs)) : {};
    const thresholds = { ...fromCerts, ...(spec.thresholds ?? {}) };
    return phaseDiagram(rows, thresholds, spec.title);
  }
  if (spec.kind === "decay-curve") return decayCurve(rows, spec.title);
  if (spec.kind === "crf-heatmap") return heatmap(rows, spec.title);
  throw new SchemaError(`unknown figure kind ${(spec as FigureSpec).kind}`);
}

/** Render to file; nothing is written when parsing or validation fails. */
export function render(spec: FigureSpec): string {
  const svg = buildFigure(spec);
  writeFileSync(spec.output, svg);
  return spec.output;
}

export { EmptyCsvError, SchemaError };
