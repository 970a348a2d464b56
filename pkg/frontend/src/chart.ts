/**
 * Canvas strip charts and the SOC gauge.
 *
 * Each chart scrolls a fixed time window (the ring span) right to left.
 * Lines break at recorded stream gaps; dense windows are thinned to a
 * pixel budget by keeping first/min/max/last of each bucket, so every
 * plotted value is a verbatim frame value. Scale and thinning helpers
 * are pure and exported for tests.
 */

import { FrameRing } from "./ring.js";
import { FRAME_NUMERIC_KEYS } from "./types.js";

export type NumericFrameKey = (typeof FRAME_NUMERIC_KEYS)[number];

export interface SeriesDef {
  key: NumericFrameKey;
  label: string;
  color: string;
}

export interface StripChartOptions {
  title: string;
  unit: string;
  series: SeriesDef[];
  /** Extend the y range to include zero (power/current panels). */
  includeZero?: boolean;
  refLabel?: string;
}

// ---- pure scale helpers ----

/** Round a raw step up to the 1/2/5 ladder. */
export function niceStep(raw: number): number {
  if (!(raw > 0) || !Number.isFinite(raw)) return 1;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const frac = raw / mag;
  const nice = frac <= 1 ? 1 : frac <= 2 ? 2 : frac <= 5 ? 5 : 10;
  return nice * mag;
}

export interface Scale {
  lo: number;
  hi: number;
  ticks: number[];
}

/** Padded nice scale covering [min, max] with about `target` ticks. */
export function niceScale(min: number, max: number, target = 4): Scale {
  if (!Number.isFinite(min) || !Number.isFinite(max)) return { lo: 0, hi: 1, ticks: [0, 0.5, 1] };
  if (min > max) [min, max] = [max, min];
  if (min === max) {
    const pad = Math.max(Math.abs(min) * 0.1, 0.5);
    min -= pad;
    max += pad;
  }
  const pad = (max - min) * 0.06;
  const step = niceStep((max - min + 2 * pad) / target);
  const lo = Math.floor((min - pad) / step) * step;
  const hi = Math.ceil((max + pad) / step) * step;
  const ticks: number[] = [];
  for (let v = lo; v <= hi + step * 1e-9; v += step) ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  return { lo, hi, ticks };
}

/**
 * Indices to plot when `n` samples must fit `maxBuckets` pixel buckets:
 * first, min, max, and last of every bucket, in order, deduplicated.
 * Identity when the window is already sparse.
 */
export function thinIndices(values: number[], maxBuckets: number): number[] {
  const n = values.length;
  if (maxBuckets < 1 || n <= maxBuckets) {
    return Array.from({ length: n }, (_, i) => i);
  }
  const out: number[] = [];
  for (let b = 0; b < maxBuckets; b++) {
    const i0 = Math.floor((b * n) / maxBuckets);
    const i1 = Math.max(i0 + 1, Math.floor(((b + 1) * n) / maxBuckets));
    let iMin = i0;
    let iMax = i0;
    for (let i = i0; i < i1; i++) {
      if (values[i] < values[iMin]) iMin = i;
      if (values[i] > values[iMax]) iMax = i;
    }
    for (const i of [i0, Math.min(iMin, iMax), Math.max(iMin, iMax), i1 - 1]) {
      if (out.length === 0 || i > out[out.length - 1]) out.push(i);
    }
  }
  return out;
}

export interface SeriesPoint {
  step: number;
  t: number;
  v: number;
}

/** Split a step-ordered point run wherever the stream recorded a gap. */
export function segmentsOf(
  points: SeriesPoint[],
  isGapAfter: (step: number) => boolean,
): SeriesPoint[][] {
  const segments: SeriesPoint[][] = [];
  let current: SeriesPoint[] = [];
  for (const p of points) {
    current.push(p);
    if (isGapAfter(p.step)) {
      segments.push(current);
      current = [];
    }
  }
  if (current.length > 0) segments.push(current);
  return segments;
}

export function fmtValue(v: number): string {
  const a = Math.abs(v);
  if (a >= 100) return v.toFixed(0);
  if (a >= 10) return v.toFixed(1);
  return v.toFixed(2);
}

export function fmtClock(t: number): string {
  const total = Math.round(Math.max(t, 0));
  const m = Math.floor(total / 60);
  return `${m}:${String(total - m * 60).padStart(2, "0")}`;
}

// ---- rendering ----

const MARGIN = { left: 48, right: 10, top: 24, bottom: 18 };
const GRID = "rgba(255,255,255,0.07)";
const AXIS_TEXT = "rgba(255,255,255,0.45)";
const REF_COLOR = "rgba(255,255,255,0.65)";

export class StripChart {
  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly opts: StripChartOptions,
  ) {}

  draw(ring: FrameRing, reference: number | null = null): void {
    const dpr = typeof devicePixelRatio === "number" ? devicePixelRatio : 1;
    const cssW = this.canvas.clientWidth || 320;
    const cssH = this.canvas.clientHeight || 160;
    if (this.canvas.width !== cssW * dpr || this.canvas.height !== cssH * dpr) {
      this.canvas.width = cssW * dpr;
      this.canvas.height = cssH * dpr;
    }
    const ctx = this.canvas.getContext("2d")!;
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    ctx.clearRect(0, 0, cssW, cssH);
    ctx.font = "10px system-ui, sans-serif";

    const plotW = cssW - MARGIN.left - MARGIN.right;
    const plotH = cssH - MARGIN.top - MARGIN.bottom;
    const latest = ring.latest();

    // y range over visible values, the reference line, and optionally 0
    let min = Infinity;
    let max = -Infinity;
    ring.forEach((f) => {
      for (const s of this.opts.series) {
        const v = f[s.key] as number;
        if (v < min) min = v;
        if (v > max) max = v;
      }
    });
    if (reference !== null) {
      min = Math.min(min, reference);
      max = Math.max(max, reference);
    }
    if (this.opts.includeZero) {
      min = Math.min(min, 0);
      max = Math.max(max, 0);
    }
    const scale = latest === null ? niceScale(0, 1) : niceScale(min, max);
    const t1 = latest === null ? ring.spanSeconds : latest.t;
    const t0 = t1 - ring.spanSeconds;
    const x = (t: number) => MARGIN.left + ((t - t0) / (t1 - t0)) * plotW;
    const y = (v: number) =>
      MARGIN.top + plotH - ((v - scale.lo) / (scale.hi - scale.lo)) * plotH;

    // grid and axes
    ctx.strokeStyle = GRID;
    ctx.fillStyle = AXIS_TEXT;
    ctx.lineWidth = 1;
    for (const tick of scale.ticks) {
      const py = y(tick);
      ctx.beginPath();
      ctx.moveTo(MARGIN.left, py);
      ctx.lineTo(cssW - MARGIN.right, py);
      ctx.stroke();
      ctx.textAlign = "right";
      ctx.textBaseline = "middle";
      ctx.fillText(fmtValue(tick), MARGIN.left - 4, py);
    }
    const xStep = ring.spanSeconds / 6;
    for (let k = 0; k <= 6; k++) {
      const t = t0 + k * xStep;
      const px = x(t);
      ctx.beginPath();
      ctx.moveTo(px, MARGIN.top);
      ctx.lineTo(px, MARGIN.top + plotH);
      ctx.stroke();
      if (k % 2 === 0 && t >= 0) {
        ctx.textAlign = "center";
        ctx.textBaseline = "top";
        ctx.fillText(fmtClock(t), px, MARGIN.top + plotH + 4);
      }
    }

    // title and legend with latest values
    ctx.textAlign = "left";
    ctx.textBaseline = "alphabetic";
    ctx.fillStyle = "rgba(255,255,255,0.8)";
    ctx.font = "600 11px system-ui, sans-serif";
    ctx.fillText(`${this.opts.title} (${this.opts.unit})`, MARGIN.left, 14);
    ctx.font = "10px system-ui, sans-serif";
    let lx = MARGIN.left + ctx.measureText(this.opts.title).width + 70;
    for (const s of this.opts.series) {
      ctx.fillStyle = s.color;
      const text =
        latest === null ? s.label : `${s.label} ${fmtValue(latest[s.key] as number)}`;
      ctx.fillText(text, lx, 14);
      lx += ctx.measureText(text).width + 14;
    }

    if (latest === null) {
      ctx.fillStyle = AXIS_TEXT;
      ctx.textAlign = "center";
      ctx.textBaseline = "middle";
      ctx.fillText("awaiting data", MARGIN.left + plotW / 2, MARGIN.top + plotH / 2);
      return;
    }

    // series polylines, broken at gaps, thinned to the pixel budget
    ctx.save();
    ctx.beginPath();
    ctx.rect(MARGIN.left, MARGIN.top, plotW, plotH);
    ctx.clip();
    for (const s of this.opts.series) {
      const points: SeriesPoint[] = [];
      ring.forEach((f) => points.push({ step: f.step, t: f.t, v: f[s.key] as number }));
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 1.4;
      for (const segment of segmentsOf(points, (step) => ring.hasGapAfter(step))) {
        const idx = thinIndices(
          segment.map((p) => p.v),
          Math.max(Math.floor(plotW), 1),
        );
        ctx.beginPath();
        idx.forEach((i, k) => {
          const p = segment[i];
          if (k === 0) ctx.moveTo(x(p.t), y(p.v));
          else ctx.lineTo(x(p.t), y(p.v));
        });
        ctx.stroke();
      }
    }
    if (reference !== null) {
      ctx.strokeStyle = REF_COLOR;
      ctx.setLineDash([5, 4]);
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(MARGIN.left, y(reference));
      ctx.lineTo(cssW - MARGIN.right, y(reference));
      ctx.stroke();
      ctx.setLineDash([]);
      if (this.opts.refLabel) {
        ctx.fillStyle = REF_COLOR;
        ctx.textAlign = "right";
        ctx.textBaseline = "bottom";
        ctx.fillText(this.opts.refLabel, cssW - MARGIN.right - 2, y(reference) - 2);
      }
    }
    ctx.restore();
  }
}

const GAUGE_START = Math.PI * 0.75;
const GAUGE_SWEEP = Math.PI * 1.5;

export function drawSocGauge(canvas: HTMLCanvasElement, socPct: number | null): void {
  const dpr = typeof devicePixelRatio === "number" ? devicePixelRatio : 1;
  const cssW = canvas.clientWidth || 140;
  const cssH = canvas.clientHeight || 120;
  if (canvas.width !== cssW * dpr || canvas.height !== cssH * dpr) {
    canvas.width = cssW * dpr;
    canvas.height = cssH * dpr;
  }
  const ctx = canvas.getContext("2d")!;
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, cssW, cssH);

  const cx = cssW / 2;
  const cy = cssH / 2 + 8;
  const r = Math.min(cssW, cssH) / 2 - 10;
  ctx.lineWidth = 9;
  ctx.lineCap = "round";
  ctx.strokeStyle = "rgba(255,255,255,0.1)";
  ctx.beginPath();
  ctx.arc(cx, cy, r, GAUGE_START, GAUGE_START + GAUGE_SWEEP);
  ctx.stroke();

  if (socPct === null) {
    ctx.fillStyle = AXIS_TEXT;
    ctx.font = "10px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText("awaiting data", cx, cy);
    return;
  }

  const frac = Math.min(Math.max(socPct / 100, 0), 1);
  const color = socPct < 20 ? "#ff6b6b" : socPct < 40 ? "#ffc23a" : "#00e5a0";
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.arc(cx, cy, r, GAUGE_START, GAUGE_START + GAUGE_SWEEP * frac);
  ctx.stroke();
  ctx.fillStyle = "#e2e8f0";
  ctx.font = "600 20px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  ctx.fillText(`${socPct.toFixed(1)}%`, cx, cy - 2);
  ctx.fillStyle = AXIS_TEXT;
  ctx.font = "10px system-ui, sans-serif";
  ctx.fillText("SOC", cx, cy + 16);
}
