/** Scripted-annotator utilities for the end-to-end test: everything a
 * careful human does with their eyes, reimplemented with small grid ops. */

import type { MaskGrid, Point } from "../src/raster.js";
import { emptyMask } from "../src/raster.js";

export function dice(a: MaskGrid, b: MaskGrid): number {
  let inter = 0;
  let areaA = 0;
  let areaB = 0;
  for (let i = 0; i < a.data.length; i++) {
    const va = a.data[i] > 127 ? 1 : 0;
    const vb = b.data[i] > 127 ? 1 : 0;
    inter += va & vb;
    areaA += va;
    areaB += vb;
  }
  if (areaA + areaB === 0) return 1;
  return (2 * inter) / (areaA + areaB);
}

export function errorRegions(label: MaskGrid, prediction: MaskGrid): {
  falseNeg: MaskGrid;
  falsePos: MaskGrid;
} {
  const falseNeg = emptyMask(label.height, label.width);
  const falsePos = emptyMask(label.height, label.width);
  for (let i = 0; i < label.data.length; i++) {
    const truth = label.data[i] > 127;
    const pred = prediction.data[i] > 127;
    if (truth && !pred) falseNeg.data[i] = 255;
    if (!truth && pred) falsePos.data[i] = 255;
  }
  return { falseNeg, falsePos };
}

export function area(mask: MaskGrid): number {
  let n = 0;
  for (let i = 0; i < mask.data.length; i++) if (mask.data[i] > 127) n++;
  return n;
}

/** Two-pass chamfer distance to the nearest background pixel; grid borders
 * count as background, matching the engine's convention. */
export function chamferDepth(mask: MaskGrid): Float32Array {
  const { height, width, data } = mask;
  const INF = 1e9;
  const d = new Float32Array(height * width);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const i = r * width + c;
      d[i] = data[i] > 127 ? INF : 0;
      if (d[i] > 0) {
        const border = Math.min(r + 1, height - r, c + 1, width - c);
        d[i] = Math.min(d[i], border);
        const take = (rr: number, cc: number, cost: number) => {
          if (rr >= 0 && cc >= 0 && cc < width) {
            d[i] = Math.min(d[i], d[rr * width + cc] + cost);
          }
        };
        take(r, c - 1, 1);
        take(r - 1, c, 1);
        take(r - 1, c - 1, 1.4);
        take(r - 1, c + 1, 1.4);
      }
    }
  }
  for (let r = height - 1; r >= 0; r--) {
    for (let c = width - 1; c >= 0; c--) {
      const i = r * width + c;
      if (d[i] > 0) {
        const take = (rr: number, cc: number, cost: number) => {
          if (rr < height && cc >= 0 && cc < width) {
            d[i] = Math.min(d[i], d[rr * width + cc] + cost);
          }
        };
        take(r, c + 1, 1);
        take(r + 1, c, 1);
        take(r + 1, c + 1, 1.4);
        take(r + 1, c - 1, 1.4);
      }
    }
  }
  return d;
}

/** Largest 8-connected component of a mask. */
export function largestComponent(mask: MaskGrid): MaskGrid {
  const { height, width, data } = mask;
  const labels = new Int32Array(height * width);
  let best = 0;
  let bestSize = 0;
  let current = 0;
  for (let start = 0; start < data.length; start++) {
    if (data[start] <= 127 || labels[start] !== 0) continue;
    current += 1;
    let size = 0;
    const stack = [start];
    labels[start] = current;
    while (stack.length) {
      const i = stack.pop()!;
      size += 1;
      const r = Math.floor(i / width);
      const c = i % width;
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) {
          const rr = r + dr;
          const cc = c + dc;
          if (rr < 0 || rr >= height || cc < 0 || cc >= width) continue;
          const j = rr * width + cc;
          if (data[j] > 127 && labels[j] === 0) {
            labels[j] = current;
            stack.push(j);
          }
        }
      }
    }
    if (size > bestSize) {
      bestSize = size;
      best = current;
    }
  }
  const out = emptyMask(height, width);
  if (best > 0) {
    for (let i = 0; i < labels.length; i++) {
      if (labels[i] === best) out.data[i] = 255;
    }
  }
  return out;
}

/** A plus-shaped stroke through the region's deepest pixel, clipped to
 * where the region is at least one pixel deep. */
export function plusStrokePath(region: MaskGrid): Point[][] {
  const depth = chamferDepth(region);
  let bestI = 0;
  for (let i = 1; i < depth.length; i++) {
    if (depth[i] > depth[bestI]) bestI = i;
  }
  const { height, width, data } = region;
  const row = Math.floor(bestI / width);
  const col = bestI % width;
  const inside = (r: number, c: number) =>
    r >= 0 && r < height && c >= 0 && c < width
    && data[r * width + c] > 127 && depth[r * width + c] >= 1;
  const walk = (dr: number, dc: number): Point => {
    let r = row;
    let c = col;
    while (inside(r + dr, c + dc)) {
      r += dr;
      c += dc;
    }
    return { row: r, col: c };
  };
  return [
    [walk(0, -1), { row, col }, walk(0, 1)],
    [walk(-1, 0), { row, col }, walk(1, 0)],
  ];
}
