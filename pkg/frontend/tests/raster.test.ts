import { describe, expect, it } from "vitest";

import { emptyMask, maskSupport, rasterizeStroke, softenStroke, unionMasks } from "../src/raster.js";

describe("stroke rasterization", () => {
  it("stamps a single point", () => {
    const mask = emptyMask(16, 16);
    rasterizeStroke(mask, [{ row: 8, col: 8 }], 1.0);
    expect(mask.data[8 * 16 + 8]).toBe(255);
    expect(maskSupport(mask)).toBeGreaterThanOrEqual(1);
  });

  it("draws a connected line between points", () => {
    const mask = emptyMask(16, 16);
    rasterizeStroke(mask, [{ row: 4, col: 2 }, { row: 4, col: 13 }], 0.6);
    for (let c = 2; c <= 13; c++) {
      expect(mask.data[4 * 16 + c]).toBe(255);
    }
  });

  it("is deterministic", () => {
    const a = emptyMask(24, 24);
    const b = emptyMask(24, 24);
    const points = [{ row: 3, col: 4 }, { row: 17, col: 12 }, { row: 9, col: 20 }];
    rasterizeStroke(a, points, 1.4);
    rasterizeStroke(b, points, 1.4);
    expect(Buffer.from(a.data).equals(Buffer.from(b.data))).toBe(true);
  });

  it("clips stamps at the grid edge", () => {
    const mask = emptyMask(8, 8);
    rasterizeStroke(mask, [{ row: 0, col: 0 }], 2.5);
    expect(mask.data[0]).toBe(255);
  });

  it("softens strokes into [0,255] without growing support much", () => {
    const mask = emptyMask(16, 16);
    rasterizeStroke(mask, [{ row: 8, col: 3 }, { row: 8, col: 12 }], 0.6);
    const soft = softenStroke(mask);
    expect(soft.data[8 * 16 + 7]).toBeGreaterThan(127);
    const values = new Set(soft.data);
    expect(values.size).toBeGreaterThan(2); // genuinely fractional
  });

  it("unions layers by max", () => {
    const a = emptyMask(8, 8);
    const b = emptyMask(8, 8);
    a.data[10] = 100;
    b.data[10] = 200;
    b.data[11] = 50;
    const u = unionMasks(a, b);
    expect(u.data[10]).toBe(200);
    expect(u.data[11]).toBe(50);
  });
});
