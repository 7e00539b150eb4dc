/**
 * Readers for the solver's documented CSV/JSON outputs, with hard schema
 * checks that name the offending column or key.
 */

import { readFileSync } from "node:fs";

export class SchemaMismatch extends Error {}

export interface Table {
  columns: string[];
  rows: string[][];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n").filter((ln) => ln.trim().length > 0);
  if (lines.length === 0) throw new SchemaMismatch(`${path}: empty CSV`);
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((ln) => ln.split(","));
  return { columns, rows };
}

export function requireColumns(path: string, table: Table, names: string[]): number[] {
  return names.map((name) => {
    const idx = table.columns.indexOf(name);
    if (idx < 0) {
      throw new SchemaMismatch(
        `${path}: missing column '${name}' (have: ${table.columns.join(", ")})`);
    }
    return idx;
  });
}

export function numeric(path: string, column: string, value: string): number {
  const v = Number(value);
  if (!Number.isFinite(v) && value !== "nan" && value !== "inf" && value !== "-inf") {
    throw new SchemaMismatch(`${path}: column '${column}' has non-numeric value '${value}'`);
  }
  return v;
}

export interface TraceRow {
  q: number;
  fValue: number;
  supNorm: number;
  elResidual: number;
  iterations: number;
}

export function readTrace(path: string): TraceRow[] {
  const table = readCsv(path);
  const [iq, ifv, isn, ier, iit] = requireColumns(
    path, table, ["q", "f_value", "sup_norm", "el_residual", "iterations"]);
  return table.rows.map((r) => ({
    q: numeric(path, "q", r[iq]),
    fValue: numeric(path, "f_value", r[ifv]),
    supNorm: numeric(path, "sup_norm", r[isn]),
    elResidual: numeric(path, "el_residual", r[ier]),
    iterations: numeric(path, "iterations", r[iit]),
  }));
}

export interface SweepRow {
  metric: string;
  target: string;
  verdict: string;
  status: string;
  residual: number;
}

export function readSweep(path: string): SweepRow[] {
  const table = readCsv(path);
  const [im, it, iv, is, ir] = requireColumns(
    path, table, ["metric", "target", "verdict", "status", "residual"]);
  return table.rows.map((r) => ({
    metric: r[im],
    target: r[it],
    verdict: r[iv],
    status: r[is],
    residual: numeric(path, "residual", r[ir]),
  }));
}

export interface ChartRow {
  s: number;
  psiBar: number;
  kbar: number;
}

export function readChart(path: string): ChartRow[] {
  const table = readCsv(path);
  const [is, ip, ik] = requireColumns(path, table, ["s", "psi_bar", "kbar"]);
  return table.rows.map((r) => ({
    s: numeric(path, "s", r[is]),
    psiBar: numeric(path, "psi_bar", r[ip]),
    kbar: numeric(path, "kbar", r[ik]),
  }));
}

export interface RefinementPoint {
  nodes: number;
  residual: number;
  label: string;
}

/** prescribe_result.json: node count from the embedded config, fd residual. */
export function readRefinementPoint(path: string): RefinementPoint {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  const grid = doc?.config?.grid;
  const residual = doc?.residual_fd;
  if (typeof residual !== "number") {
    throw new SchemaMismatch(`${path}: missing key 'residual_fd'`);
  }
  const nodes = grid?.mode === "periodic"
    ? Math.pow(grid?.nodes_per_axis ?? NaN, grid?.dimension ?? NaN)
    : grid?.node_count;
  if (typeof nodes !== "number" || !Number.isFinite(nodes)) {
    throw new SchemaMismatch(`${path}: missing key 'config.grid.node_count'`);
  }
  return { nodes, residual, label: doc?.status ?? "" };
}
