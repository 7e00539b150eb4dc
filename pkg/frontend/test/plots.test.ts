import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { encodePng } from "../src/png.js";
import { readSweep, readTrace, SchemaMismatch, requireColumns, readCsv } from "../src/schema.js";
import { expandGlob, main, parseSpec, renderSpec } from "../src/main.js";

const SAMPLES = join(__dirname, "..", "samples");

function specFile(dir: string, spec: object): string {
  const path = join(dir, "spec.json");
  writeFileSync(path, JSON.stringify(spec));
  return path;
}

describe("png encoder", () => {
  it("emits a valid signature and dimensions", () => {
    const png = encodePng(3, 2, new Uint8Array(24).fill(255));
    expect([...png.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(png.readUInt32BE(16)).toBe(3);
    expect(png.readUInt32BE(20)).toBe(2);
  });

  it("is deterministic", () => {
    const pixels = new Uint8Array(400).map((_, i) => (i * 37) % 256);
    expect(encodePng(10, 10, pixels).equals(encodePng(10, 10, pixels))).toBe(true);
  });
});

describe("schema readers", () => {
  it("reads the committed sweep and trace samples", () => {
    const sweep = readSweep(join(SAMPLES, "sweep", "sweep.csv"));
    expect(sweep.length).toBe(12);
    for (const row of sweep) {
      expect(row.status === "Solved").toBe(row.verdict === "Positive");
    }
    const trace = readTrace(join(SAMPLES, "prescribe_m1500", "prescribe_trace.csv"));
    expect(trace.length).toBeGreaterThan(3);
    expect(trace.every((r) => Number.isFinite(r.q))).toBe(true);
  });

  it("names the missing column on schema mismatch", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "metric,target\na,b\n");
    expect(() => requireColumns(bad, readCsv(bad), ["status"]))
      .toThrow(/missing column 'status'/);
  });
});

describe("figure rendering from committed samples", () => {
  it("renders the sweep matrix", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const out = join(dir, "sweep.png");
    const rc = main(["--spec", specFile(dir, {
      kind: "sweep-matrix",
      inputs: [join(SAMPLES, "sweep", "sweep.csv")],
      output: out,
      title: "fixture matrix",
    })]);
    expect(rc).toBe(0);
    expect(readFileSync(out).subarray(1, 4).toString("ascii")).toBe("PNG");
  });

  it("renders a solved-run trace with monotone residual tail", () => {
    const trace = readTrace(join(SAMPLES, "prescribe_m1500", "prescribe_trace.csv"));
    const tail = trace.slice(-3).map((r) => r.elResidual);
    expect(tail[2]).toBeLessThanOrEqual(tail[0] *(1 + 1e-9));
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const out = join(dir, "trace.png");
    const rc = main(["--spec", specFile(dir, {
      kind: "trace",
      inputs: [join(SAMPLES, "prescribe_m1500", "prescribe_trace.csv")],
      output: out,
    })]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
  });

  it("renders a refinement-order figure from two solve results", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const out = join(dir, "order.png");
    const rc = main(["--spec", specFile(dir, {
      kind: "refinement-order",
      inputs: [join(SAMPLES, "prescribe_m*", "prescribe_result.json")],
      output: out,
    })]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
  });

  it("renders the compactified chart profile", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const out = join(dir, "profile.png");
    const rc = main(["--spec", specFile(dir, {
      kind: "profile",
      inputs: [join(SAMPLES, "chart", "chart.csv")],
      output: out,
    })]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
  });

  it("produces pixel-identical images for identical inputs", () => {
    const spec = {
      kind: "sweep-matrix" as const,
      inputs: [join(SAMPLES, "sweep", "sweep.csv")],
      output: "unused.png",
    };
    const a = renderSpec(parseSpec(spec));
    const b = renderSpec(parseSpec(spec));
    expect(a.equals(b)).toBe(true);
  });
});

describe("failure modes", () => {
  it("exits nonzero with no file on empty input list", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const out = join(dir, "never.png");
    const rc = main(["--spec", specFile(dir, {
      kind: "trace",
      inputs: [join(dir, "nothing-*.csv")],
      output: out,
    })]);
    expect(rc).toBe(1);
    expect(existsSync(out)).toBe(false);
  });

  it("exits 2 on schema mismatch naming the column", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "q,f_value\n2.5,0.1\n");
    const out = join(dir, "never.png");
    const rc = main(["--spec", specFile(dir, {
      kind: "trace", inputs: [bad], output: out,
    })]);
    expect(rc).toBe(2);
    expect(existsSync(out)).toBe(false);
  });

  it("rejects unknown spec keys", () => {
    expect(() => parseSpec({ kind: "trace", inputs: [], output: "x.png", oops: 1 }))
      .toThrow(/unknown spec key/);
  });

  it("expands simple wildcards", () => {
    const hits = expandGlob(join(SAMPLES, "prescribe_m*", "*.json"));
    expect(hits.length).toBe(2);
  });
});
