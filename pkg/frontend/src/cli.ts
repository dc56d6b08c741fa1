#!/usr/bin/env node
/**
 * condphase-plots --kind phase-diagram --input sweep.csv [--cert certs.csv]
 *                 [--low 6.8e-5] [--high 0.4942] [--title "..."]
 *                 --output figure.svg
 */

import { FigureKind, FigureSpec, render } from "./figures.js";

const KINDS: FigureKind[] = ["phase-diagram", "decay-curve", "crf-heatmap"];

export function parseArgs(argv: string[]): FigureSpec {
  const spec: Partial<FigureSpec> = { inputs: [], certInputs: [], thresholds: {} };
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${key}`);
    switch (key) {
      case "--kind":
        if (!KINDS.includes(value as FigureKind)) {
          throw new Error(`unknown kind ${value}; expected one of ${KINDS.join(", ")}`);
        }
        spec.kind = value as FigureKind;
        break;
      case "--input":
        spec.inputs!.push(value);
        break;
      case "--cert":
        spec.certInputs!.push(value);
        break;
      case "--output":
        spec.output = value;
        break;
      case "--low":
        spec.thresholds!.low = Number(value);
        break;
      case "--high":
        spec.thresholds!.high = Number(value);
        break;
      case "--title":
        spec.title = value;
        break;
      default:
        throw new Error(`unknown option ${key}`);
    }
  }
  if (!spec.kind) throw new Error("--kind is required");
  if (!spec.inputs || spec.inputs.length === 0) throw new Error("at least one --input is required");
  if (!spec.output) throw new Error("--output is required");
  return spec as FigureSpec;
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    const path = render(spec);
    console.log(`wrote ${path}`);
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
