/**
 * Figure script entry point: render one image from a plot spec.
 *
 *   node dist/main.js --spec spec.json
 *
 * The spec names input globs, the plot kind, and the output image path.
 * Exit codes: 0 ok, 1 bad spec or empty inputs, 2 input schema mismatch.
 */

import { mkdirSync, readFileSync, readdirSync, statSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { SchemaMismatch } from "./schema.js";
import { renderProfile, renderRefinementOrder, renderSweepMatrix, renderTrace } from "./plots.js";

export interface PlotSpec {
  kind: "trace" | "sweep-matrix" | "refinement-order" | "profile";
  inputs: string[];
  output: string;
  title?: string;
  x_label?: string;
  y_label?: string;
}

const KINDS = ["trace", "sweep-matrix", "refinement-order", "profile"];
const SPEC_KEYS = new Set(["kind", "inputs", "output", "title", "x_label", "y_label"]);

export function parseSpec(doc: unknown): PlotSpec {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("plot spec must be a JSON object");
  }
  const record = doc as Record<string, unknown>;
  for (const key of Object.keys(record)) {
    if (!SPEC_KEYS.has(key)) throw new Error(`unknown spec key '${key}'`);
  }
  const kind = record.kind;
  if (typeof kind !== "string" || !KINDS.includes(kind)) {
    throw new Error(`spec.kind must be one of ${KINDS.join(", ")}`);
  }
  if (!Array.isArray(record.inputs) || record.inputs.some((v) => typeof v !== "string")) {
    throw new Error("spec.inputs must be a list of path globs");
  }
  if (typeof record.output !== "string" || record.output.length === 0) {
    throw new Error("spec.output must be an image path");
  }
  return record as unknown as PlotSpec;
}

/** Minimal glob: '*' within path segments, '**' for a recursive segment. */
export function expandGlob(pattern: string): string[] {
  const parts = pattern.split("/");
  let bases: string[] = [parts[0] === "" ? "/" : parts[0].includes("*") ? "." : parts[0]];
  let start = parts[0] === "" || !parts[0].includes("*") ? 1 : 0;
  if (start === 0) bases = ["."];
  const segments = parts.slice(start).filter((p) => p.length > 0);
  for (const segment of segments) {
    const next: string[] = [];
    for (const base of bases) {
      let entries: string[];
      try {
        entries = readdirSync(base);
      } catch {
        continue;
      }
      if (segment === "**") {
        next.push(base);
        const stack = [...entries.map((e) => join(base, e))];
        while (stack.length) {
          const candidate = stack.pop()!;
          try {
            if (statSync(candidate).isDirectory()) {
              next.push(candidate);
              stack.push(...readdirSync(candidate).map((e) => join(candidate, e)));
            }
          } catch { /* unreadable entry: skip */ }
        }
      } else if (segment.includes("*")) {
        const rx = new RegExp("^" + segment.split("*").map(
          (s) => s.replace(/[.+?^${}()|[\]\\]/g, "\\$&")).join(".*") + "$");
        next.push(...entries.filter((e) => rx.test(e)).map((e) => join(base, e)));
      } else {
        next.push(join(base, segment));
      }
    }
    bases = next;
  }
  return bases.filter((p) => {
    try {
      return statSync(p).isFile();
    } catch {
      return false;
    }
  }).sort();
}


export function renderSpec(spec: PlotSpec): Buffer {
  const files = spec.inputs.flatMap((pattern) => expandGlob(pattern));
  if (files.length === 0) {
    throw new Error(`no inputs matched: ${spec.inputs.join(", ")}`);
  }
  const x = spec.x_label ?? "";
  const y = spec.y_label ?? "";
  const t = spec.title ?? "";
  switch (spec.kind) {
    case "trace":
      return renderTrace(files, x, y, t);
    case "sweep-matrix":
      return renderSweepMatrix(files, x, y, t);
    case "refinement-order":
      return renderRefinementOrder(files, x, y, t);
    case "profile":
      return renderProfile(files, x, y, t);
  }
}

export function main(argv: string[]): number {
  const idx = argv.indexOf("--spec");
  if (idx < 0 || idx + 1 >= argv.length) {
    console.error("usage: main.js --spec PATH");
    return 1;
  }
  let spec: PlotSpec;
  try {
    spec = parseSpec(JSON.parse(readFileSync(argv[idx + 1], "utf8")));
  } catch (err) {
    console.error(`spec error: ${(err as Error).message}`);
    return 1;
  }
  try {
    const png = renderSpec(spec);
    mkdirSync(dirname(spec.output), { recursive: true });
    writeFileSync(spec.output, png);
    console.log(`wrote ${spec.output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaMismatch) {
      console.error(`schema mismatch: ${(err as Error).message}`);
      return 2;
    }
    console.error(`render error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("main.js")) {
  process.exit(main(process.argv.slice(2)));
}
