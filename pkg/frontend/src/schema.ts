/**
 * Parsing and validation of the sweep CSV schema published by the simulation
 * harness. Figures read this schema and nothing else.
 */

import Papa from "papaparse";

export const REQUIRED_COLUMNS = [
  "experiment",
  "p",
  "beta",
  "k",
  "m",
  "box",
  "replicates",
  "estimate",
  "std_error",
  "cert_value",
  "cert_holds",
  "seed",
  "wall_ms",
] as const;

export interface SweepRow {
  experiment: string;
  p: number | null;
  beta: number | null;
  k: number | null;
  m: number | null;
  box: string;
  replicates: number | null;
  estimate: number | null;
  std_error: number | null;
  cert_value: number | null;
  cert_holds: boolean | null;
  seed: string;
  wall_ms: number | null;
}

export class SchemaError extends Error {}
export class EmptyCsvError extends Error {}

function num(value: string | undefined): number | null {
  if (value === undefined || value === "") return null;
  const parsed = Number(value);
  if (Number.isNaN(parsed)) throw new SchemaError(`not a number: ${value}`);
  return parsed;
}

function flag(value: string | undefined): boolean | null {
  if (value === undefined || value === "") return null;
  if (value === "true") return true;
  if (value === "false") return false;
  throw new SchemaError(`not a boolean flag: ${value}`);
}

export function parseSweepCsv(text: string, source = "<csv>"): SweepRow[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${source}: ${parsed.errors[0].message}`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = REQUIRED_COLUMNS.filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`${source}: missing columns ${missing.join(", ")}`);
  }
  if (parsed.data.length === 0) {
    throw new EmptyCsvError(`${source}: no data rows`);
  }
  return parsed.data.map((raw) => ({
    experiment: raw.experiment ?? "",
    p: num(raw.p),
    beta: num(raw.beta),
    k: num(raw.k),
    m: num(raw.m),
    box: raw.box ?? "",
    replicates: num(raw.replicates),
    estimate: num(raw.estimate),
    std_error: num(raw.std_error),
    cert_value: num(raw.cert_value),
    cert_holds: flag(raw.cert_holds),
    seed: raw.seed ?? "",
    wall_ms: num(raw.wall_ms),
  }));
}
