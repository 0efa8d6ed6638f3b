import { describe, expect, it } from "vitest";

import type { BinBoundaries } from "../src/api.js";
import { formatRange, formatTooltip, pixelToBin, resolveTooltip } from "../src/tooltip.js";
import tipBins from "./fixtures/bins_tip.json";

const tipBoundaries = tipBins as unknown as BinBoundaries;

describe("pixelToBin", () => {
  it("is exact when the display size is an integer multiple of B", () => {
    const B = 32;
    const display = 256; // 8 css px per bin
    for (let bin = 0; bin < B; bin++) {
      for (const inner of [0, 3, 7]) {
        expect(pixelToBin(bin * 8 + inner, display, B, "x")).toBe(bin);
      }
    }
  });

  it("uses a bottom origin for y: the bottom-left pixel is bin (0, 0)", () => {
    const B = 32;
    const display = 256;
    expect(pixelToBin(0, display, B, "x")).toBe(0);
    expect(pixelToBin(display - 1, display, B, "y")).toBe(0); // bottom row
    expect(pixelToBin(0, display, B, "y")).toBe(B - 1); // top row
  });

  it("hides the tooltip off-image", () => {
    expect(pixelToBin(-1, 256, 32, "x")).toBeNull();
    expect(pixelToBin(256, 256, 32, "x")).toBeNull();
    expect(pixelToBin(1000, 256, 32, "y")).toBeNull();
  });

  it("stays in range and monotone for non-multiple display sizes", () => {
    const B = 32;
    const display = 250;
    let prev = -1;
    for (let px = 0; px < display; px++) {
      const bin = pixelToBin(px, display, B, "x")!;
      expect(bin).toBeGreaterThanOrEqual(0);
      expect(bin).toBeLessThan(B);
      expect(bin).toBeGreaterThanOrEqual(prev);
      prev = bin;
    }
  });
});

describe("zero-tip band fidelity", () => {
  // The fixture is a real boundaries payload for a tip dimension with 30%
  // zero values: bins 0..8 hold only $0 tips.
  it("every pixel over the bottom band resolves the y range to (0, 0)", () => {
    const B = tipBoundaries.bins;
    const display = 256;
    const pxPerBin = display / B;
    const bandBins = 9;
    for (let py = display - bandBins * pxPerBin; py < display; py++) {
      const yBin = pixelToBin(py, display, B, "y")!;
      const state = resolveTooltip("img", 0, yBin, tipBoundaries, tipBoundaries);
      expect(state.yRange).toEqual([0.0, 0.0]);
      // tooltip shows exactly what the endpoint returned, by reference
      expect(state.yRange).toBe(tipBoundaries.ranges[yBin]);
    }
  });

  it("the first bin above the band has a wider range", () => {
    const state = resolveTooltip("img", 0, 9, tipBoundaries, tipBoundaries);
    const [lo, hi] = state.yRange!;
    expect(lo).toBe(0.0);
    expect(hi).toBeGreaterThan(0.0);
  });
});

describe("formatting", () => {
  it("collapses degenerate ranges and spells out empty bins", () => {
    expect(formatRange([0, 0])).toBe("[0]");
    expect(formatRange([0, 0.24])).toBe("[0, 0.2400]");
    expect(formatRange(null)).toBe("empty bin");
    expect(formatRange(["a", "b"])).toBe("[a, b]");
    expect(formatRange([["x", 1], ["y", 2]])).toBe("[(x, 1), (y, 2)]");
  });

  it("renders '[x]: range, [y]: range'", () => {
    const state = resolveTooltip("img", 0, 0, tipBoundaries, tipBoundaries);
    expect(formatTooltip("tip", "distance", state)).toBe("tip: [0], distance: [0]");
  });
});
