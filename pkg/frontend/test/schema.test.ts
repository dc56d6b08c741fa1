import { readFileSync } from "fs";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { EmptyCsvError, SchemaError, parseSweepCsv } from "../src/schema.js";

const FIXTURES = join(__dirname, "fixtures");

describe("sweep csv schema", () => {
  it("parses a harness stability sweep", () => {
    const rows = parseSweepCsv(readFileSync(join(FIXTURES, "stability_k6_m4.csv"), "utf8"));
    expect(rows.length).toBe(11);
    expect(rows[0].experiment).toBe("stability-sweep");
    expect(rows[0].p).toBeCloseTo(0.02, 12);
    expect(rows[0].estimate).toBeGreaterThan(0.9);
    expect(rows[0].std_error).toBeGreaterThan(0);
    expect(rows[0].cert_holds).toBeNull();
  });

  it("parses certificate flags", () => {
    const rows = parseSweepCsv(readFileSync(join(FIXTURES, "peierls_cert.csv"), "utf8"));
    expect(rows.some((r) => r.cert_holds === true)).toBe(true);
    expect(rows.some((r) => r.cert_holds === false)).toBe(true);
  });

  it("rejects a missing column", () => {
    const text = "experiment,p,beta\nstability-sweep,0.1,1.0\n";
    expect(() => parseSweepCsv(text)).toThrow(SchemaError);
    expect(() => parseSweepCsv(text)).toThrow(/missing columns/);
  });

  it("rejects an empty csv", () => {
    const header =
      "experiment,p,beta,k,m,box,replicates,estimate,std_error,cert_value,cert_holds,seed,wall_ms\n";
    expect(() => parseSweepCsv(header)).toThrow(EmptyCsvError);
  });

  it("rejects malformed numbers", () => {
    const header =
      "experiment,p,beta,k,m,box,replicates,estimate,std_error,cert_value,cert_holds,seed,wall_ms\n";
    expect(() => parseSweepCsv(header + "x,zap,,,,,,,,,,s,0\n")).toThrow(SchemaError);
  });
});
