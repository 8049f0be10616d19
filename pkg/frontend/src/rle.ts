/** Run-length wire format for binary masks: [start, length, ...] over the
 * flattened row-major grid, counting foreground runs only. */

import type { MaskGrid } from "./raster.js";

export function encodeRuns(mask: MaskGrid): number[] {
  const runs: number[] = [];
  const n = mask.data.length;
  let i = 0;
  while (i < n) {
    if (mask.data[i] > 0) {
      const start = i;
      while (i < n && mask.data[i] > 0) i++;
      runs.push(start, i - start);
    } else {
      i++;
    }
  }
  return runs;
}

export function decodeRuns(runs: number[], height: number, width: number): MaskGrid {
  if (runs.length % 2 !== 0) {
    throw new Error("run list must have even length");
  }
  const data = new Uint8Array(height * width);
  for (let i = 0; i < runs.length; i += 2) {
    const start = runs[i];
    const length = runs[i + 1];
    if (start < 0 || length < 0 || start + length > data.length) {
      throw new Error(`run (${start}, ${length}) outside ${height}x${width} grid`);
    }
    data.fill(255, start, start + length);
  }
  return { height, width, data };
}
