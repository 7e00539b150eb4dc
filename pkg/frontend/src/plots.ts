/**
 * Figure renderers.  Each one consumes the solver's documented outputs and
 * never recomputes any physics; byte-identical inputs give pixel-identical
 * images.
 */

import { Canvas, BLACK, BLUE, Frame, GRAY, GREEN, LIGHT, ORANGE, RED, WHITE,
         drawAxes, fmtTick, toPx } from "./raster.js";
import { encodePng } from "./png.js";
import { readChart, readRefinementPoint, readSweep, readTrace } from "./schema.js";

const W = 720;
const H = 480;
const MARGIN = { left: 80, right: 30, top: 40, bottom: 60 };

function frame(xMin: number, xMax: number, yMin: number, yMax: number,
               xLog = false, yLog = false): Frame {
  return { x0: MARGIN.left, y0: MARGIN.top, w: W - MARGIN.left - MARGIN.right,
           h: H - MARGIN.top - MARGIN.bottom, xMin, xMax, yMin, yMax, xLog, yLog };
}

function polyline(cv: Canvas, f: Frame, xs: number[], ys: number[],
                  color: [number, number, number, number]): void {
  for (let i = 1; i < xs.length; i++) {
    const [x0, y0] = toPx(f, xs[i - 1], ys[i - 1]);
    const [x1, y1] = toPx(f, xs[i], ys[i]);
    cv.line(x0, y0, x1, y1, color);
    cv.line(x0, y0 + 1, x1, y1 + 1, color);
  }
  for (let i = 0; i < xs.length; i++) {
    const [x, y] = toPx(f, xs[i], ys[i]);
    cv.dot(x, y, color);
  }
}

/** Solve-trace figure: Euler-Lagrange residual and sup norm along the stages. */
export function renderTrace(inputs: string[], xLabel: string, yLabel: string,
                            title: string): Buffer {
  const rows = inputs.flatMap(readTrace);
  const qs = rows.map((r) => r.q);
  const residuals = rows.map((r) => Math.max(r.elResidual, 1e-18));
  const sups = rows.map((r) => Math.max(r.supNorm, 1e-18));
  const lo = Math.min(...residuals, ...sups) / 2;
  const hi = Math.max(...residuals, ...sups) * 2;
  const cv = new Canvas(W, H);
  const f = frame(Math.min(...qs) - 0.1, Math.max(...qs) + 0.1, lo, hi, false, true);
  drawAxes(cv, f, xLabel || "subcritical exponent q", yLabel || "stage diagnostics",
           title || "solve trace");
  polyline(cv, f, qs, residuals, BLUE);
  polyline(cv, f, qs, sups, ORANGE);
  cv.dot(MARGIN.left + 10, MARGIN.top + 10, BLUE);
  cv.text(MARGIN.left + 18, MARGIN.top + 6, "EL RESIDUAL");
  cv.dot(MARGIN.left + 10, MARGIN.top + 24, ORANGE);
  cv.text(MARGIN.left + 18, MARGIN.top + 20, "SUP NORM");
  return encodePng(W, H, cv.pixels);
}

const STATUS_COLORS: Record<string, [number, number, number, number]> = {
  Solved: GREEN,
  Diverged: RED,
  Failed: GRAY,
  Inconsistent: BLACK,
};

/** Sweep-matrix heatmap: metric rows x target columns colored by status. */
export function renderSweepMatrix(inputs: string[], xLabel: string, yLabel: string,
                                  title: string): Buffer {
  const rows = inputs.flatMap(readSweep);
  const metrics = [...new Set(rows.map((r) => r.metric))];
  const targets = [...new Set(rows.map((r) => r.target))];
  const cv = new Canvas(W, H);
  const left = 160;
  const top = 80;
  const cw = Math.floor((W - left - 30) / targets.length);
  const ch = Math.floor((H - top - 80) / metrics.length);
  cv.text(left, 10, title || "sweep matrix: status by fixture");
  for (const row of rows) {
    const i = metrics.indexOf(row.metric);
    const j = targets.indexOf(row.target);
    const color = STATUS_COLORS[row.status] ?? BLACK;
    cv.fillRect(left + j * cw + 2, top + i * ch + 2, cw - 4, ch - 4, color);
    const mark = row.verdict === "Positive" ? "+" : row.verdict === "Negative" ? "-" : "0";
    cv.text(left + j * cw + cw / 2 - 2, top + i * ch + ch / 2 - 3, mark, WHITE);
  }
  metrics.forEach((m, i) => cv.text(10, top + i * ch + ch / 2 - 3, m));
  targets.forEach((t, j) => {
    cv.text(left + j * cw + cw / 2 - cv.textWidth(t) / 2, top - 14, t);
  });
  let lx = left;
  for (const [status, color] of Object.entries(STATUS_COLORS)) {
    cv.fillRect(lx, H - 40, 10, 10, color);
    lx += 14 + cv.text(lx + 14, H - 39, status);
    lx += 14;
  }
  cv.text(left, H - 22, xLabel || "cell mark: zero-set verdict sign");
  if (yLabel) cv.text(10, H - 22, yLabel);
  return encodePng(W, H, cv.pixels);
}

/** Refinement-order figure: residual vs node count, log-log, fitted slope. */
export function renderRefinementOrder(inputs: string[], xLabel: string, yLabel: string,
                                      title: string): Buffer {
  const pts = inputs.map(readRefinementPoint).sort((a, b) => a.nodes - b.nodes);
  const xs = pts.map((p) => p.nodes);
  const ys = pts.map((p) => Math.max(p.residual, 1e-18));
  const cv = new Canvas(W, H);
  const f = frame(xs[0] / 1.3, xs[xs.length - 1] * 1.3,
                  Math.min(...ys) / 3, Math.max(...ys) * 3, true, true);
  drawAxes(cv, f, xLabel || "grid nodes", yLabel || "curvature residual",
           title || "refinement study");
  polyline(cv, f, xs, ys, BLUE);
  if (pts.length >= 2) {
    const a = pts[0];
    const b = pts[pts.length - 1];
    const slope = Math.log(b.residual / a.residual) / Math.log(b.nodes / a.nodes);
    cv.text(MARGIN.left + 12, MARGIN.top + 8,
            `OBSERVED ORDER: ${(-slope).toFixed(2)}`);
  }
  return encodePng(W, H, cv.pixels);
}

/** Compactified-chart profile: kbar against the inverted coordinate s. */
export function renderProfile(inputs: string[], xLabel: string, yLabel: string,
                              title: string): Buffer {
  const rows = inputs.flatMap(readChart).filter((r) => r.s > 0);
  const xs = rows.map((r) => r.s);
  const ys = rows.map((r) => r.kbar);
  const lo = Math.min(...ys);
  const hi = Math.max(...ys);
  const pad = (hi - lo || 1) * 0.08;
  const cv = new Canvas(W, H);
  const f = frame(0, Math.max(...xs) * 1.05, lo - pad, hi + pad);
  drawAxes(cv, f, xLabel || "inverted radius s", yLabel || "metric deviation",
           title || "compactified chart profile");
  if (lo < 0 && hi > 0) {
    const [, zy] = toPx(f, 0, 0);
    cv.line(f.x0, zy, f.x0 + f.w, zy, LIGHT);
  }
  polyline(cv, f, xs, ys, BLUE);
  return encodePng(W, H, cv.pixels);
}
