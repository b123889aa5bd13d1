/** Deterministic SVG construction: scales, axes, curves, bands, heatmaps.
 *
 * Everything is assembled by string concatenation so renders are pure
 * functions of their inputs (no DOM, no timestamps, no randomness).
 */

export interface Scale {
  (v: number): number;
  ticks(): number[];
  domain: [number, number];
}

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / (n * step);
  const factor = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * factor;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) out.push(v);
  return out;
}

export function linearScale(lo: number, hi: number, rLo: number, rHi: number): Scale {
  const d = hi - lo || 1;
  const f = ((v: number) => rLo + ((v - lo) / d) * (rHi - rLo)) as Scale;
  f.ticks = () => niceTicks(lo, hi);
  f.domain = [lo, hi];
  return f;
}

export function logScale(lo: number, hi: number, rLo: number, rHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const d = lhi - llo || 1;
  const f = ((v: number) => rLo + ((Math.log10(v) - llo) / d) * (rHi - rLo)) as Scale;
  f.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(llo); e <= Math.floor(lhi); e++) out.push(Math.pow(10, e));
    return out.length >= 2 ? out : [lo, hi];
  };
  f.domain = [lo, hi];
  return f;
}

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1).replace("e+", "e");
  return String(Math.round(v * 1e6) / 1e6);
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 640,
  height: 420,
  margin: { top: 28, right: 20, bottom: 46, left: 64 },
};

export function pathFrom(xs: number[], ys: number[], x: Scale, y: Scale): string {
  let d = "";
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    const px = x(xs[i]);
    const py = y(ys[i]);
    if (!Number.isFinite(px) || !Number.isFinite(py)) {
      pen = false;
      continue;
    }
    d += `${pen ? "L" : "M"}${px.toFixed(2)},${py.toFixed(2)}`;
    pen = true;
  }
  return d;
}

export function bandPolygon(
  xs: number[], lo: number[], hi: number[], x: Scale, y: Scale,
): string {
  const up: string[] = [];
  const down: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (![xs[i], lo[i], hi[i]].every(Number.isFinite)) continue;
    up.push(`${x(xs[i]).toFixed(2)},${y(hi[i]).toFixed(2)}`);
    down.unshift(`${x(xs[i]).toFixed(2)},${y(lo[i]).toFixed(2)}`);
  }
  if (up.length === 0) return "";
  return up.concat(down).join(" ");
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(public frame: Frame = DEFAULT_FRAME) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  axes(x: Scale, y: Scale, xLabel: string, yLabel: string, title: string): void {
    const { width, height, margin } = this.frame;
    const x0 = margin.left;
    const x1 = width - margin.right;
    const y0 = height - margin.bottom;
    const y1 = margin.top;
    this.add(`<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" fill="none" stroke="#444"/>`);
    for (const t of x.ticks()) {
      const px = x(t);
      if (px < x0 - 0.5 || px > x1 + 0.5) continue;
      this.add(`<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 5}" stroke="#444"/>`);
      this.add(`<text x="${px.toFixed(2)}" y="${y0 + 18}" font-size="11" text-anchor="middle">${fmt(t)}</text>`);
    }
    for (const t of y.ticks()) {
      const py = y(t);
      if (py < y1 - 0.5 || py > y0 + 0.5) continue;
      this.add(`<line x1="${x0 - 5}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="#444"/>`);
      this.add(`<text x="${x0 - 8}" y="${(py + 4).toFixed(2)}" font-size="11" text-anchor="end">${fmt(t)}</text>`);
    }
    this.add(`<text x="${(x0 + x1) / 2}" y="${height - 8}" font-size="13" text-anchor="middle">${xLabel}</text>`);
    this.add(`<text x="16" y="${(y0 + y1) / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 ${(y0 + y1) / 2})">${yLabel}</text>`);
    this.add(`<text x="${(x0 + x1) / 2}" y="${y1 - 10}" font-size="14" font-weight="bold" text-anchor="middle">${title}</text>`);
  }

  legend(entries: Array<{ label: string; color: string; dashed?: boolean }>): void {
    const { margin } = this.frame;
    const x = margin.left + 12;
    let y = margin.top + 16;
    for (const e of entries) {
      this.add(`<line x1="${x}" y1="${y - 4}" x2="${x + 26}" y2="${y - 4}" stroke="${e.color}" stroke-width="2"${e.dashed ? ' stroke-dasharray="6 3"' : ""}/>`);
      this.add(`<text x="${x + 32}" y="${y}" font-size="12">${e.label}</text>`);
      y += 16;
    }
  }

  plotArea(): { x0: number; x1: number; y0: number; y1: number } {
    const { width, height, margin } = this.frame;
    return {
      x0: margin.left,
      x1: width - margin.right,
      y0: height - margin.bottom,
      y1: margin.top,
    };
  }

  render(): string {
    const { width, height } = this.frame;
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
      ...this.parts,
      "</svg>",
    ].join("\n");
  }
}

// five-stop dark-to-bright ramp for the bound surface
const RAMP: Array<[number, number, number]> = [
  [13, 8, 135],
  [126, 3, 168],
  [204, 71, 120],
  [248, 149, 64],
  [240, 249, 33],
];

export function rampColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (RAMP.length - 1);
  const i = Math.min(RAMP.length - 2, Math.floor(pos));
  const f = pos - i;
  const mix = RAMP[i].map((c, k) => Math.round(c + f * (RAMP[i + 1][k] - c)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}
