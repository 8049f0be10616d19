/** Browser wiring: canvas layers, tools, and the submit/undo/export loop.
 *
 * Strokes are rasterized at image resolution (not screen resolution), so
 * the payload is independent of zoom, and the mask the server receives is
 * bit-identical to the raster drawn here.
 */

import { SegmentationClient, base64ToBytes } from "./api.js";
import { CanvasState, type Tool } from "./state.js";
import { decodeGrayPng } from "./png.js";
import { exportAnnotationBundle } from "./export.js";
import type { MaskGrid, Point } from "./raster.js";

const SCALE = 6;

interface Ui {
  state: CanvasState | null;
  client: SegmentationClient;
  image: MaskGrid | null;
  stroke: Point[];
  drawing: boolean;
  boxStart: Point | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function canvasPoint(canvas: HTMLCanvasElement, event: MouseEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return {
    row: ((event.clientY - rect.top) / rect.height) * canvas.height / SCALE,
    col: ((event.clientX - rect.left) / rect.width) * canvas.width / SCALE,
  };
}

function drawBase(ctx: CanvasRenderingContext2D, image: MaskGrid): void {
  const { height, width, data } = image;
  const pixels = ctx.createImageData(width * SCALE, height * SCALE);
  for (let r = 0; r < height * SCALE; r++) {
    for (let c = 0; c < width * SCALE; c++) {
      const v = data[Math.floor(r / SCALE) * width + Math.floor(c / SCALE)];
      const i = (r * width * SCALE + c) * 4;
      pixels.data[i] = v;
      pixels.data[i + 1] = v;
      pixels.data[i + 2] = v;
      pixels.data[i + 3] = 255;
    }
  }
  ctx.putImageData(pixels, 0, 0);
}

function drawOverlay(
  ctx: CanvasRenderingContext2D, mask: MaskGrid | null, opacity: number,
  strokes: { pos: MaskGrid; neg: MaskGrid },
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const paint = (grid: MaskGrid, rgba: [number, number, number, number]) => {
    for (let r = 0; r < grid.height; r++) {
      for (let c = 0; c < grid.width; c++) {
        if (grid.data[r * grid.width + c] > 0) {
          ctx.fillStyle = `rgba(${rgba[0]},${rgba[1]},${rgba[2]},${rgba[3]})`;
          ctx.fillRect(c * SCALE, r * SCALE, SCALE, SCALE);
        }
      }
    }
  };
  if (mask) paint(mask, [64, 128, 255, opacity]);
  paint(strokes.pos, [0, 200, 0, 0.8]);
  paint(strokes.neg, [220, 40, 40, 0.8]);
}

export function mountApp(root: Document = document): void {
  const ui: Ui = {
    state: null,
    client: new SegmentationClient(
      (root.getElementById("base-url") as HTMLInputElement | null)?.value
        ?? window.location.origin,
    ),
    image: null,
    stroke: [],
    drawing: false,
    boxStart: null,
  };
  const base = el<HTMLCanvasElement>("base-layer");
  const overlay = el<HTMLCanvasElement>("overlay-layer");
  const status = el<HTMLSpanElement>("status");
  const submitButton = el<HTMLButtonElement>("submit");

  const refresh = () => {
    if (!ui.state || !ui.image) return;
    const { pos, neg } = ui.state.fullRasters();
    drawOverlay(
      overlay.getContext("2d")!, ui.state.lastMask, ui.state.overlayOpacity,
      { pos, neg },
    );
    submitButton.disabled = !ui.state.canSubmit();
    status.textContent = `step ${ui.state.stepCounter}, ${ui.state.pendingCount()} pending prompt(s)`;
  };

  el<HTMLInputElement>("file").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    const bytes = new Uint8Array(await file.arrayBuffer());
    const image = await decodeGrayPng(bytes);
    const session = await ui.client.createSession(bytes);
    ui.image = image;
    ui.state = new CanvasState(session.height, session.width);
    ui.state.sessionId = session.session_id;
    base.width = overlay.width = image.width * SCALE;
    base.height = overlay.height = image.height * SCALE;
    drawBase(base.getContext("2d")!, image);
    refresh();
  });

  for (const tool of ["brush_pos", "brush_neg", "click_pos", "click_neg", "box"] as Tool[]) {
    el<HTMLButtonElement>(`tool-${tool}`).addEventListener("click", () => {
      if (ui.state) ui.state.tool = tool;
    });
  }

  overlay.addEventListener("mousedown", (event) => {
    if (!ui.state) return;
    const p = canvasPoint(overlay, event);
    if (ui.state.tool === "brush_pos" || ui.state.tool === "brush_neg") {
      ui.drawing = true;
      ui.stroke = [p];
    } else if (ui.state.tool === "box") {
      ui.boxStart = p;
    } else {
      ui.state.addClick({
        row: Math.floor(p.row), col: Math.floor(p.col),
        sign: ui.state.tool === "click_pos" ? "pos" : "neg",
      });
      refresh();
    }
  });
  overlay.addEventListener("mousemove", (event) => {
    if (ui.drawing) ui.stroke.push(canvasPoint(overlay, event));
  });
  overlay.addEventListener("mouseup", (event) => {
    if (!ui.state) return;
    if (ui.drawing) {
      ui.drawing = false;
      ui.state.addStroke(ui.stroke, ui.state.tool === "brush_pos" ? "pos" : "neg");
      ui.stroke = [];
      refresh();
    } else if (ui.boxStart) {
      const p = canvasPoint(overlay, event);
      ui.state.addBox({
        row_min: Math.floor(Math.min(ui.boxStart.row, p.row)),
        col_min: Math.floor(Math.min(ui.boxStart.col, p.col)),
        row_max: Math.floor(Math.max(ui.boxStart.row, p.row)),
        col_max: Math.floor(Math.max(ui.boxStart.col, p.col)),
      });
      ui.boxStart = null;
      refresh();
    }
  });

  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    ui.state?.undo();
    refresh();
  });

  submitButton.addEventListener("click", async () => {
    if (!ui.state) return;
    submitButton.disabled = true;
    try {
      const result = await ui.state.submit(ui.client);
      ui.state.lastMask = await decodeGrayPng(base64ToBytes(result.response.mask_png_b64));
      status.textContent = result.checksumsVerified
        ? `step ${ui.state.stepCounter} ok`
        : `step ${ui.state.stepCounter}: CHECKSUM MISMATCH`;
    } catch (err) {
      status.textContent = `submit failed, prompts kept: ${err}`;
    }
    refresh();
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    if (!ui.state) return;
    const zip = exportAnnotationBundle(ui.state, ui.state.lastMask);
    const blob = new Blob([zip.buffer as ArrayBuffer], { type: "application/zip" });
    const link = root.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "annotation.zip";
    link.click();
  });
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("DOMContentLoaded", () => mountApp());
}
