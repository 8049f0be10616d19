/** Annotation session state: stroke layers, clicks, boxes, undo history,
 * and the submit bookkeeping that keeps the client and server in step.
 *
 * Prompts accumulate append-only; each submit sends only the delta since
 * the previous one. Undoing past a submitted prompt flags the session for
 * reset + full replay on the next submit, which restores server state to
 * exactly what the local history rasterizes to.
 */

import type { ClickPrompt, BoxPrompt, PredictPayload, PredictResponse, SegmentationClient } from "./api.js";
import { maskChecksum } from "./checksum.js";
import { emptyMask, rasterizeStroke, softenStroke, unionMasks, type MaskGrid, type Point } from "./raster.js";
import { encodeRuns } from "./rle.js";
import { encodeGrayPng } from "./png.js";
import { bytesToBase64 } from "./api.js";

export type Tool = "brush_pos" | "brush_neg" | "click_pos" | "click_neg" | "box";

export interface Stroke {
  points: Point[];
  radius: number;
  sign: "pos" | "neg";
  soften: boolean;
}

type Action =
  | { kind: "stroke"; stroke: Stroke }
  | { kind: "click"; click: ClickPrompt }
  | { kind: "box"; box: BoxPrompt };

export interface SubmitResult {
  response: PredictResponse;
  checksumsVerified: boolean;
}

export class CanvasState {
  readonly height: number;
  readonly width: number;
  tool: Tool = "brush_pos";
  brushRadius = 1.2;
  overlayOpacity = 0.5;
  sessionId: string | null = null;
  stepCounter = 0;
  lastMask: MaskGrid | null = null;

  private actions: Action[] = [];
  private submittedCount = 0;
  private needsReplay = false;

  constructor(height: number, width: number) {
    this.height = height;
    this.width = width;
  }

  addStroke(points: Point[], sign: "pos" | "neg", radius?: number, soften = true): void {
    this.actions.push({
      kind: "stroke",
      stroke: { points, radius: radius ?? this.brushRadius, sign, soften },
    });
  }

  addClick(click: ClickPrompt): void {
    this.actions.push({ kind: "click", click });
  }

  addBox(box: BoxPrompt): void {
    this.actions.push({ kind: "box", box });
  }

  pendingCount(): number {
    return this.actions.length - this.submittedCount;
  }

  canSubmit(): boolean {
    return this.needsReplay ? this.actions.length > 0 : this.pendingCount() > 0;
  }

  undo(): boolean {
    if (this.actions.length === 0) return false;
    this.actions.pop();
    if (this.actions.length < this.submittedCount) {
      // local history diverged from the server: replay everything next time
      this.needsReplay = true;
      this.submittedCount = this.actions.length;
    }
    return true;
  }

  /** Rasterize one sign's strokes from a slice of the action history. */
  private rasterLayer(sign: "pos" | "neg", from: number, to: number): MaskGrid | null {
    let out: MaskGrid | null = null;
    for (const action of this.actions.slice(from, to)) {
      if (action.kind !== "stroke" || action.stroke.sign !== sign) continue;
      let mask = emptyMask(this.height, this.width);
      rasterizeStroke(mask, action.stroke.points, action.stroke.radius);
      if (action.stroke.soften) {
        mask = softenStroke(mask);
      }
      out = out === null ? mask : unionMasks(out, mask);
    }
    return out;
  }

  /** Wire payload plus the exact rasters it encodes (for checksum checks). */
  buildPayload(from: number, reset: boolean): {
    payload: PredictPayload;
    rasters: Partial<Record<"pos" | "neg", MaskGrid>>;
  } {
    const clicks: ClickPrompt[] = [];
    const boxes: BoxPrompt[] = [];
    for (const action of this.actions.slice(from)) {
      if (action.kind === "click") clicks.push(action.click);
      if (action.kind === "box") boxes.push(action.box);
    }
    const rasters: Partial<Record<"pos" | "neg", MaskGrid>> = {};
    const scribbles: Record<string, unknown> = {};
    for (const sign of ["pos", "neg"] as const) {
      const layer = this.rasterLayer(sign, from, this.actions.length);
      if (layer === null) continue;
      rasters[sign] = layer;
      const binary = layer.data.every((v) => v === 0 || v === 255);
      if (binary) {
        scribbles[`${sign}_rle`] = { runs: encodeRuns(layer) };
      } else {
        scribbles[`${sign}_png_b64`] = bytesToBase64(encodeGrayPng(layer));
      }
    }
    const payload: PredictPayload = {};
    if (clicks.length) payload.clicks = clicks;
    if (boxes.length) payload.boxes = boxes;
    if (Object.keys(scribbles).length) payload.scribbles = scribbles;
    if (reset) payload.reset = true;
    return { payload, rasters };
  }

  async submit(client: SegmentationClient): Promise<SubmitResult> {
    if (this.sessionId === null) {
      throw new Error("no open session");
    }
    if (!this.canSubmit()) {
      throw new Error("nothing new to submit");
    }
    const reset = this.needsReplay;
    const from = reset ? 0 : this.submittedCount;
    const { payload, rasters } = this.buildPayload(from, reset);
    const response = await client.predict(this.sessionId, payload);
    let verified = true;
    for (const sign of ["pos", "neg"] as const) {
      const raster = rasters[sign];
      if (raster === undefined) continue;
      const expected = maskChecksum(raster.data);
      if (response.scribble_checksums[sign] !== expected) {
        verified = false;
      }
    }
    this.submittedCount = this.actions.length;
    this.needsReplay = false;
    this.stepCounter = response.step_index;
    return { response, checksumsVerified: verified };
  }

  /** Everything drawn so far, rasterized per sign (for export bundles). */
  fullRasters(): { pos: MaskGrid; neg: MaskGrid; clicks: ClickPrompt[]; boxes: BoxPrompt[] } {
    const pos = this.rasterLayer("pos", 0, this.actions.length) ?? emptyMask(this.height, this.width);
    const neg = this.rasterLayer("neg", 0, this.actions.length) ?? emptyMask(this.height, this.width);
    const clicks: ClickPrompt[] = [];
    const boxes: BoxPrompt[] = [];
    for (const action of this.actions) {
      if (action.kind === "click") clicks.push(action.click);
      if (action.kind === "box") boxes.push(action.box);
    }
    return { pos, neg, clicks, boxes };
  }

  promptCount(): number {
    return this.actions.length;
  }
}
