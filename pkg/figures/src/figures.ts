/** The four figure renderers.
 *
 * Pure post-processing: every curve comes straight from the simulator's CSV
 * files, nothing is recomputed.  Renderers return the SVG text, or null for
 * an empty input series (the caller warns and skips writing).
 */

import { column, readCsv, Table } from "./csv.js";
import { FigureSpec, unitFactor } from "./spec.js";
import {
  bandPolygon,
  DEFAULT_FRAME,
  linearScale,
  logScale,
  pathFrom,
  rampColor,
  Scale,
  SvgDoc,
} from "./svg.js";

const COLOR_TRUE = "#1f77b4";
const COLOR_EST = "#d62728";
const COLOR_ERR = "#2ca02c";
const COLOR_EKF = "#e6b000";
const COLOR_BOUND = "#111111";
const COLOR_BAND = "#2ca02c";

function finiteExtent(...series: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s) {
      if (!Number.isFinite(v)) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!(hi >= lo)) throw new Error("no finite samples to plot");
  if (hi === lo) {
    hi += 1;
    lo -= 1;
  }
  return [lo, hi];
}

function newDoc(): { doc: SvgDoc; x: (lo: number, hi: number) => Scale; y: (lo: number, hi: number, log?: boolean) => Scale } {
  const doc = new SvgDoc(DEFAULT_FRAME);
  const area = doc.plotArea();
  return {
    doc,
    x: (lo, hi) => linearScale(lo, hi, area.x0, area.x1),
    y: (lo, hi, log = false) =>
      log ? logScale(lo, hi, area.y0, area.y1) : linearScale(lo, hi, area.y0, area.y1),
  };
}

export function renderTrack(spec: FigureSpec): string | null {
  const ens = readCsv(spec.ensemble!);
  const trj = readCsv(spec.trajectory!);
  if (ens.rows.length === 0 || trj.rows.length === 0) return null;
  const { factor, label } = unitFactor(spec.units ?? "rad_s");
  const band = spec.band ?? 2;

  const tMs = column(trj, "t_s").map((v) => v * 1e3);
  const wTrue = column(trj, "omega_true_rad_s").map((v) => v * factor);
  const wEst = column(trj, "omega_est_rad_s").map((v) => v * factor);
  const amse = column(ens, "amse_rad2_s2");
  const half = amse.map((v) => band * Math.sqrt(v) * factor);
  const lo = wEst.map((v, i) => v - half[i]);
  const hi = wEst.map((v, i) => v + half[i]);

  const { doc, x, y } = newDoc();
  const xs = x(tMs[0], tMs[tMs.length - 1]);
  const [yLo, yHi] = finiteExtent(wTrue, wEst, lo, hi);
  const pad = 0.05 * (yHi - yLo);
  const ys = y(yLo - pad, yHi + pad);

  doc.add(`<polygon class="band" points="${bandPolygon(tMs, lo, hi, xs, ys)}" fill="${COLOR_BAND}" fill-opacity="0.18" stroke="none"/>`);
  doc.add(`<path class="curve" d="${pathFrom(tMs, wTrue, xs, ys)}" fill="none" stroke="${COLOR_TRUE}" stroke-width="1.4"/>`);
  doc.add(`<path class="curve" d="${pathFrom(tMs, wEst, xs, ys)}" fill="none" stroke="${COLOR_EST}" stroke-width="1.4"/>`);
  doc.axes(xs, ys, "t (ms)", `field deviation (${label})`, "Real-time tracking");
  doc.legend([
    { label: "true field", color: COLOR_TRUE },
    { label: "estimate", color: COLOR_EST },
    { label: `±${band}√aMSE band`, color: COLOR_BAND },
  ]);
  return doc.render();
}

export function renderSqueezing(spec: FigureSpec): string | null {
  const ens = readCsv(spec.ensemble!);
  if (ens.rows.length === 0) return null;
  const tMs = column(ens, "t_s").map((v) => v * 1e3);
  const sq = column(ens, "squeezing_mean_db");
  const sqEst = column(ens, "squeezing_est_mean_db");

  const { doc, x, y } = newDoc();
  const xs = x(tMs[0], tMs[tMs.length - 1]);
  const [lo, hi] = finiteExtent(sq, sqEst);
  const pad = 0.08 * (hi - lo);
  const ys = y(lo - pad, hi + pad);

  doc.add(`<line x1="${xs(tMs[0]).toFixed(2)}" y1="${ys(0).toFixed(2)}" x2="${xs(tMs[tMs.length - 1]).toFixed(2)}" y2="${ys(0).toFixed(2)}" stroke="#999" stroke-dasharray="3 3"/>`);
  doc.add(`<path class="curve" d="${pathFrom(tMs, sq, xs, ys)}" fill="none" stroke="${COLOR_TRUE}" stroke-width="1.6"/>`);
  doc.add(`<path class="curve" d="${pathFrom(tMs, sqEst, xs, ys)}" fill="none" stroke="${COLOR_EST}" stroke-width="1.6" stroke-dasharray="6 3"/>`);
  doc.axes(xs, ys, "t (ms)", "spin squeezing (dB)", "Measurement-induced squeezing");
  doc.legend([
    { label: "ensemble mean", color: COLOR_TRUE },
    { label: "filter prediction", color: COLOR_EST, dashed: true },
  ]);
  return doc.render();
}

export function renderError(spec: FigureSpec): string | null {
  const ens = readCsv(spec.ensemble!);
  if (ens.rows.length === 0) return null;
  const t = column(ens, "t_s");
  const sqrtAmse = column(ens, "sqrt_amse");
  const sqrtEkf = column(ens, "ekf_var_mean").map(Math.sqrt);
  const sqrtBound = column(ens, "bound_rad2_s2").map(Math.sqrt);

  // drop t = 0 on the log-log axes
  const keep = t.map((v) => v > 0);
  const tMs = t.filter((_, i) => keep[i]).map((v) => v * 1e3);
  const pick = (s: number[]) => s.filter((_, i) => keep[i]);

  const { doc } = newDoc();
  const area = doc.plotArea();
  const xs = logScale(tMs[0], tMs[tMs.length - 1], area.x0, area.x1);
  const [lo, hi] = finiteExtent(pick(sqrtAmse), pick(sqrtEkf), pick(sqrtBound));
  const ys = logScale(Math.max(lo * 0.8, 1e-12), hi * 1.25, area.y0, area.y1);

  doc.add(`<path class="curve" d="${pathFrom(tMs, pick(sqrtAmse), xs, ys)}" fill="none" stroke="${COLOR_ERR}" stroke-width="1.8"/>`);
  doc.add(`<path class="curve" d="${pathFrom(tMs, pick(sqrtEkf), xs, ys)}" fill="none" stroke="${COLOR_EKF}" stroke-width="1.8" stroke-dasharray="6 3"/>`);
  doc.add(`<path class="curve" d="${pathFrom(tMs, pick(sqrtBound), xs, ys)}" fill="none" stroke="${COLOR_BOUND}" stroke-width="1.8"/>`);
  doc.axes(xs, ys, "t (ms)", "error (rad/s)", "Tracking error vs quantum limit");
  doc.legend([
    { label: "√aMSE", color: COLOR_ERR },
    { label: "filter √Σ", color: COLOR_EKF, dashed: true },
    { label: "quantum bound", color: COLOR_BOUND },
  ]);
  return doc.render();
}

export function renderBoundSurface(spec: FigureSpec): string | null {
  const table = readCsv(spec.bound!);
  if (table.rows.length === 0) return null;
  const t = column(table, "t_s");
  const n = column(table, "n_atoms");
  const v = column(table, "v_inf_rad2_s2");

  const ts = Array.from(new Set(t)).sort((a, b) => a - b);
  const ns = Array.from(new Set(n)).sort((a, b) => a - b);
  if (ts.length < 2 || ns.length < 2) {
    throw new Error("bound-surface needs a grid over both t and n (use --n-scan)");
  }
  const value = new Map<string, number>();
  for (let i = 0; i < t.length; i++) value.set(`${t[i]}|${n[i]}`, v[i]);

  const doc = new SvgDoc(DEFAULT_FRAME);
  const area = doc.plotArea();
  const xs = logScale(ns[0], ns[ns.length - 1], area.x0, area.x1);
  const ys = logScale(ts[0], ts[ts.length - 1], area.y0, area.y1);
  const logs = v.filter((x) => x > 0).map(Math.log10);
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);

  for (let i = 0; i < ts.length; i++) {
    for (let j = 0; j < ns.length; j++) {
      const val = value.get(`${ts[i]}|${ns[j]}`);
      if (val === undefined || !(val > 0)) continue;
      const x0 = xs(j > 0 ? Math.sqrt(ns[j - 1] * ns[j]) : ns[0]);
      const x1 = xs(j < ns.length - 1 ? Math.sqrt(ns[j] * ns[j + 1]) : ns[ns.length - 1]);
      const y1 = ys(i > 0 ? Math.sqrt(ts[i - 1] * ts[i]) : ts[0]);
      const y0 = ys(i < ts.length - 1 ? Math.sqrt(ts[i] * ts[i + 1]) : ts[ts.length - 1]);
      const tt = (Math.log10(val) - lo) / (hi - lo || 1);
      doc.add(`<rect class="cell" x="${x0.toFixed(2)}" y="${y0.toFixed(2)}" width="${(x1 - x0).toFixed(2)}" height="${(y1 - y0).toFixed(2)}" fill="${rampColor(tt)}"/>`);
    }
  }
  doc.axes(xs, ys, "atom number N", "t (s)", "aMSE bound over N and t");
  return doc.render();
}

export function render(spec: FigureSpec): string | null {
  switch (spec.kind) {
    case "track":
      return renderTrack(spec);
    case "squeezing":
      return renderSqueezing(spec);
    case "error":
      return renderError(spec);
    case "bound-surface":
      return renderBoundSurface(spec);
  }
}
