// Cursor-to-bin mapping and tooltip resolution. Bin ranges always come
// from the bins endpoint; this module never recomputes them from pixels.

import type { BinBoundaries, BinRange } from "./api.js";

export interface TooltipState {
  imageId: string;
  xBin: number;
  yBin: number;
  xRange: BinRange;
  yRange: BinRange;
}

/** Map a cursor offset (CSS pixels from the element's top-left) to a bin
 * index. The y axis is bottom-origin: the lowest displayed row is bin 0.
 * Exact whenever the display size is an integer multiple of B. Returns
 * null off-image. */
export function pixelToBin(
  offset: number,
  displaySize: number,
  bins: number,
  axis: "x" | "y",
): number | null {
  if (offset < 0 || offset >= displaySize || displaySize <= 0) return null;
  const raw = Math.floor((offset * bins) / displaySize);
  const clamped = Math.min(bins - 1, Math.max(0, raw));
  return axis === "y" ? bins - 1 - clamped : clamped;
}

export function resolveTooltip(
  imageId: string,
  xBin: number,
  yBin: number,
  xBounds: BinBoundaries,
  yBounds: BinBoundaries,
): TooltipState {
  return {
    imageId,
    xBin,
    yBin,
    xRange: xBounds.ranges[xBin] ?? null,
    yRange: yBounds.ranges[yBin] ?? null,
  };
}

function formatValue(v: unknown): string {
  if (v === null || v === undefined) return "null";
  if (typeof v === "number") {
    return Number.isInteger(v) ? String(v) : v.toPrecision(4);
  }
  if (Array.isArray(v)) return `(${v.map(formatValue).join(", ")})`;
  return String(v);
}

export function formatRange(range: BinRange): string {
  if (range === null) return "empty bin";
  const [lo, hi] = range;
  const a = formatValue(lo);
  const b = formatValue(hi);
  return a === b ? `[${a}]` : `[${a}, ${b}]`;
}

/** "x-label: [lo, hi], y-label: [lo, hi]" */
export function formatTooltip(
  xLabel: string,
  yLabel: string,
  state: TooltipState,
): string {
  return `${xLabel}: ${formatRange(state.xRange)}, ${yLabel}: ${formatRange(state.yRange)}`;
}
