/**
 * Tiny software rasterizer: RGBA pixel canvas with rectangles, lines, and a
 * built-in 5x7 bitmap font (uppercase), enough for axis labels and legends.
 * Everything is deterministic, so identical inputs give identical pixels.
 */

export type Color = [number, number, number, number];

export const WHITE: Color = [255, 255, 255, 255];
export const BLACK: Color = [20, 20, 20, 255];
export const GRAY: Color = [150, 150, 150, 255];
export const LIGHT: Color = [230, 230, 230, 255];
export const BLUE: Color = [31, 119, 180, 255];
export const ORANGE: Color = [255, 127, 14, 255];
export const GREEN: Color = [44, 160, 44, 255];
export const RED: Color = [214, 39, 40, 255];

const GLYPHS: Record<string, string[]> = {
  "A": [" XX ", "X  X", "X  X", "XXXX", "X  X", "X  X", "X  X"],
  "B": ["XXX ", "X  X", "X  X", "XXX ", "X  X", "X  X", "XXX "],
  "C": [" XX ", "X  X", "X   ", "X   ", "X   ", "X  X", " XX "],
  "D": ["XXX ", "X  X", "X  X", "X  X", "X  X", "X  X", "XXX "],
  "E": ["XXXX", "X   ", "X   ", "XXX ", "X   ", "X   ", "XXXX"],
  "F": ["XXXX", "X   ", "X   ", "XXX ", "X   ", "X   ", "X   "],
  "G": [" XX ", "X  X", "X   ", "X XX", "X  X", "X  X", " XX "],
  "H": ["X  X", "X  X", "X  X", "XXXX", "X  X", "X  X", "X  X"],
  "I": ["XXX", " X ", " X ", " X ", " X ", " X ", "XXX"],
  "J": ["  XX", "   X", "   X", "   X", "   X", "X  X", " XX "],
  "K": ["X  X", "X X ", "XX  ", "X   ", "XX  ", "X X ", "X  X"],
  "L": ["X   ", "X   ", "X   ", "X   ", "X   ", "X   ", "XXXX"],
  "M": ["X   X", "XX XX", "X X X", "X   X", "X   X", "X   X", "X   X"],
  "N": ["X  X", "XX X", "XX X", "X XX", "X XX", "X  X", "X  X"],
  "O": [" XX ", "X  X", "X  X", "X  X", "X  X", "X  X", " XX "],
  "P": ["XXX ", "X  X", "X  X", "XXX ", "X   ", "X   ", "X   "],
  "Q": [" XX ", "X  X", "X  X", "X  X", "X  X", "X X ", " X X"],
  "R": ["XXX ", "X  X", "X  X", "XXX ", "XX  ", "X X ", "X  X"],
  "S": [" XXX", "X   ", "X   ", " XX ", "   X", "   X", "XXX "],
  "T": ["XXXXX", "  X  ", "  X  ", "  X  ", "  X  ", "  X  ", "  X  "],
  "U": ["X  X", "X  X", "X  X", "X  X", "X  X", "X  X", " XX "],
  "V": ["X   X", "X   X", "X   X", "X   X", " X X ", " X X ", "  X  "],
  "W": ["X   X", "X   X", "X   X", "X X X", "X X X", "XX XX", "X   X"],
  "X": ["X   X", "X   X", " X X ", "  X  ", " X X ", "X   X", "X   X"],
  "Y": ["X   X", "X   X", " X X ", "  X  ", "  X  ", "  X  ", "  X  "],
  "Z": ["XXXX", "   X", "  X ", " X  ", "X   ", "X   ", "XXXX"],
  "0": [" XX ", "X  X", "X XX", "XX X", "X  X", "X  X", " XX "],
  "1": [" X ", "XX ", " X ", " X ", " X ", " X ", "XXX"],
  "2": [" XX ", "X  X", "   X", "  X ", " X  ", "X   ", "XXXX"],
  "3": ["XXX ", "   X", "   X", " XX ", "   X", "   X", "XXX "],
  "4": ["X  X", "X  X", "X  X", "XXXX", "   X", "   X", "   X"],
  "5": ["XXXX", "X   ", "XXX ", "   X", "   X", "X  X", " XX "],
  "6": [" XX ", "X   ", "XXX ", "X  X", "X  X", "X  X", " XX "],
  "7": ["XXXX", "   X", "  X ", "  X ", " X  ", " X  ", " X  "],
  "8": [" XX ", "X  X", "X  X", " XX ", "X  X", "X  X", " XX "],
  "9": [" XX ", "X  X", "X  X", " XXX", "   X", "   X", " XX "],
  " ": ["   ", "   ", "   ", "   ", "   ", "   ", "   "],
  ".": ["  ", "  ", "  ", "  ", "  ", "XX", "XX"],
  ",": ["  ", "  ", "  ", "  ", " X", " X", "X "],
  "-": ["    ", "    ", "    ", "XXXX", "    ", "    ", "    "],
  "+": ["   ", "   ", " X ", "XXX", " X ", "   ", "   "],
  "/": ["   X", "   X", "  X ", "  X ", " X  ", " X  ", "X   "],
  "(": [" X", "X ", "X ", "X ", "X ", "X ", " X"],
  ")": ["X ", " X", " X", " X", " X", " X", "X "],
  "=": ["    ", "    ", "XXXX", "    ", "XXXX", "    ", "    "],
  ":": ["  ", "XX", "XX", "  ", "XX", "XX", "  "],
  "%": ["XX  X", "XX X ", "  X  ", "  X  ", " X   ", "X  XX", "X  XX"],
  "_": ["    ", "    ", "    ", "    ", "    ", "    ", "XXXX"],
  "^": [" X ", "X X", "   ", "   ", "   ", "   ", "   "],
  "'": ["X", "X", " ", " ", " ", " ", " "],
};

export class Canvas {
  readonly width: number;
  readonly height: number;
  readonly pixels: Uint8Array;

  constructor(width: number, height: number, background: Color = WHITE) {
    this.width = width;
    this.height = height;
    this.pixels = new Uint8Array(width * height * 4);
    this.fillRect(0, 0, width, height, background);
  }

  set(x: number, y: number, c: Color): void {
    x = Math.round(x);
    y = Math.round(y);
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    this.pixels[i] = c[0];
    this.pixels[i + 1] = c[1];
    this.pixels[i + 2] = c[2];
    this.pixels[i + 3] = c[3];
  }

  fillRect(x0: number, y0: number, w: number, h: number, c: Color): void {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        this.set(x, y, c);
      }
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, c: Color): void {
    x0 = Math.round(x0); y0 = Math.round(y0);
    x1 = Math.round(x1); y1 = Math.round(y1);
    const dx = Math.abs(x1 - x0);
    const dy = -Math.abs(y1 - y0);
    const sx = x0 < x1 ? 1 : -1;
    const sy = y0 < y1 ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(x0, y0, c);
      if (x0 === x1 && y0 === y1) break;
      const e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  /** Thick dot for data markers. */
  dot(x: number, y: number, c: Color, r = 2): void {
    for (let dy = -r; dy <= r; dy++) {
      for (let dx = -r; dx <= r; dx++) {
        if (dx * dx + dy * dy <= r * r) this.set(x + dx, y + dy, c);
      }
    }
  }

  text(x: number, y: number, message: string, c: Color = BLACK): number {
    let cx = Math.round(x);
    for (const raw of message.toUpperCase()) {
      const glyph = GLYPHS[raw] ?? GLYPHS[" "];
      for (let row = 0; row < glyph.length; row++) {
        for (let col = 0; col < glyph[row].length; col++) {
          if (glyph[row][col] === "X") this.set(cx + col, y + row, c);
        }
      }
      cx += glyph[0].length + 1;
    }
    return cx - Math.round(x);
  }

  textWidth(message: string): number {
    let w = 0;
    for (const raw of message.toUpperCase()) {
      const glyph = GLYPHS[raw] ?? GLYPHS[" "];
      w += glyph[0].length + 1;
    }
    return w;
  }
}

/** Round-ish tick labels: scientific below 1e-3 or above 1e4. */
export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(1).replace("e", "E");
  }
  const digits = a >= 100 ? 0 : a >= 1 ? 1 : 3;
  return v.toFixed(digits);
}

export interface Frame {
  x0: number; y0: number; w: number; h: number;
  xMin: number; xMax: number; yMin: number; yMax: number;
  xLog?: boolean; yLog?: boolean;
}

const tr = (v: number, lo: number, hi: number, log?: boolean): number => {
  if (log) return (Math.log10(v) - Math.log10(lo)) / (Math.log10(hi) - Math.log10(lo));
  return (v - lo) / (hi - lo);
};

export function toPx(f: Frame, x: number, y: number): [number, number] {
  const px = f.x0 + tr(x, f.xMin, f.xMax, f.xLog) * f.w;
  const py = f.y0 + f.h - tr(y, f.yMin, f.yMax, f.yLog) * f.h;
  return [px, py];
}

export function ticks(lo: number, hi: number, log?: boolean, count = 5): number[] {
  if (log) {
    const out: number[] = [];
    const eLo = Math.ceil(Math.log10(lo) - 1e-9);
    const eHi = Math.floor(Math.log10(hi) + 1e-9);
    const step = Math.max(1, Math.floor((eHi - eLo) / count) || 1);
    for (let e = eLo; e <= eHi; e += step) out.push(Math.pow(10, e));
    return out.length >= 2 ? out : [lo, hi];
  }
  const span = hi - lo;
  if (span <= 0) return [lo];
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const scaled = span / count / step;
  const nice = scaled >= 5 ? 5 * step : scaled >= 2 ? 2 * step : step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / nice) * nice; v <= hi + 1e-12 * span; v += nice) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export function drawAxes(cv: Canvas, f: Frame, xLabel: string, yLabel: string,
                         title: string): void {
  cv.fillRect(f.x0, f.y0, f.w, 1, GRAY);
  cv.fillRect(f.x0, f.y0 + f.h, f.w, 1, BLACK);
  cv.fillRect(f.x0, f.y0, 1, f.h, BLACK);
  cv.fillRect(f.x0 + f.w, f.y0, 1, f.h, GRAY);
  for (const t of ticks(f.xMin, f.xMax, f.xLog)) {
    const [px] = toPx(f, t, f.yMin);
    cv.line(px, f.y0 + f.h, px, f.y0 + f.h + 4, BLACK);
    const label = fmtTick(t);
    cv.text(px - cv.textWidth(label) / 2, f.y0 + f.h + 7, label);
  }
  for (const t of ticks(f.yMin, f.yMax, f.yLog)) {
    const [, py] = toPx(f, f.xMin, t);
    cv.line(f.x0 - 4, py, f.x0, py, BLACK);
    const label = fmtTick(t);
    cv.text(f.x0 - 6 - cv.textWidth(label), py - 3, label);
  }
  cv.text(f.x0 + f.w / 2 - cv.textWidth(xLabel) / 2, f.y0 + f.h + 20, xLabel);
  cv.text(8, f.y0 - 16, yLabel);
  cv.text(f.x0 + f.w / 2 - cv.textWidth(title) / 2, 8, title);
}
