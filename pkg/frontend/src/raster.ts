/** Stroke rasterization at image resolution.
 *
 * The same raster drives both the on-screen overlay and the wire payload,
 * so what the server segments is exactly what the user drew.
 */

export interface Point {
  row: number;
  col: number;
}

export interface MaskGrid {
  height: number;
  width: number;
  /** Row-major intensities on [0, 255]. */
  data: Uint8Array;
}

export function emptyMask(height: number, width: number): MaskGrid {
  return { height, width, data: new Uint8Array(height * width) };
}

function stamp(mask: MaskGrid, row: number, col: number, radius: number): void {
  const r0 = Math.max(0, Math.floor(row - radius));
  const r1 = Math.min(mask.height - 1, Math.ceil(row + radius));
  const c0 = Math.max(0, Math.floor(col - radius));
  const c1 = Math.min(mask.width - 1, Math.ceil(col + radius));
  const rr = radius * radius;
  for (let r = r0; r <= r1; r++) {
    for (let c = c0; c <= c1; c++) {
      const dr = r - row;
      const dc = c - col;
      if (dr * dr + dc * dc <= rr) {
        mask.data[r * mask.width + c] = 255;
      }
    }
  }
}

/** Rasterize a polyline brush stroke into an existing mask. */
export function rasterizeStroke(mask: MaskGrid, points: Point[], radius: number): void {
  if (points.length === 0) return;
  if (points.length === 1) {
    stamp(mask, points[0].row, points[0].col, radius);
    return;
  }
  for (let i = 0; i + 1 < points.length; i++) {
    const a = points[i];
    const b = points[i + 1];
    const steps = Math.max(Math.abs(b.row - a.row), Math.abs(b.col - a.col)) * 2 + 1;
    for (let s = 0; s <= steps; s++) {
      const t = s / steps;
      stamp(mask, a.row + t * (b.row - a.row), a.col + t * (b.col - a.col), radius);
    }
  }
}

/** 3x3 Gaussian smoothing (sigma 0.5) that keeps thin strokes prediction-
 * friendly; matches the engine's treatment of hand-drawn scribbles. */
export function softenStroke(mask: MaskGrid): MaskGrid {
  const k = [0.10650698, 0.78698604, 0.10650698];
  const { height, width } = mask;
  const tmp = new Float32Array(height * width);
  const out = new Float32Array(height * width);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      let acc = 0;
      for (let d = -1; d <= 1; d++) {
        const cc = c + d;
        if (cc >= 0 && cc < width) acc += k[d + 1] * mask.data[r * width + cc];
      }
      tmp[r * width + c] = acc;
    }
  }
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      let acc = 0;
      for (let d = -1; d <= 1; d++) {
        const rr = r + d;
        if (rr >= 0 && rr < height) acc += k[d + 1] * tmp[rr * width + c];
      }
      out[r * width + c] = acc;
    }
  }
  const data = new Uint8Array(height * width);
  for (let i = 0; i < out.length; i++) {
    data[i] = Math.max(0, Math.min(255, Math.round(out[i])));
  }
  return { height, width, data };
}

export function unionMasks(a: MaskGrid, b: MaskGrid): MaskGrid {
  if (a.height !== b.height || a.width !== b.width) {
    throw new Error(`mask shapes differ: ${a.height}x${a.width} vs ${b.height}x${b.width}`);
  }
  const data = new Uint8Array(a.data.length);
  for (let i = 0; i < data.length; i++) {
    data[i] = Math.max(a.data[i], b.data[i]);
  }
  return { height: a.height, width: a.width, data };
}

export function maskSupport(mask: MaskGrid): number {
  let n = 0;
  for (let i = 0; i < mask.data.length; i++) if (mask.data[i] > 0) n++;
  return n;
}
