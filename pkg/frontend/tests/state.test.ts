import { describe, expect, it } from "vitest";

import type { PredictPayload, PredictResponse, SegmentationClient } from "../src/api.js";
import { maskChecksum } from "../src/checksum.js";
import { decodeRuns } from "../src/rle.js";
import { CanvasState } from "../src/state.js";

class FakeClient {
  calls: PredictPayload[] = [];
  step = 0;

  async predict(_sessionId: string, payload: PredictPayload): Promise<PredictResponse> {
    this.calls.push(payload);
    if (payload.reset) this.step = 0;
    this.step += 1;
    const checksums: Record<string, number> = {};
    for (const sign of ["pos", "neg"] as const) {
      const rle = payload.scribbles?.[`${sign}_rle`];
      if (rle) {
        checksums[sign] = maskChecksum(decodeRuns(rle.runs, 16, 16).data);
      }
      const png = payload.scribbles?.[`${sign}_png_b64`];
      if (png) {
        // echo whatever the raster hashes to; the real server decodes the PNG
        checksums[sign] = -1;
      }
    }
    return {
      step_index: this.step,
      mask_png_b64: "",
      soft_mask_png_b64: "",
      logits_stats: { min: 0, max: 0, mean: 0 },
      scribble_checksums: checksums,
      logits_spg1_b64: null,
    };
  }
}

function makeState(): CanvasState {
  const state = new CanvasState(16, 16);
  state.sessionId = "s";
  return state;
}

describe("canvas state", () => {
  it("blocks submit with no new prompts", async () => {
    const state = makeState();
    expect(state.canSubmit()).toBe(false);
    await expect(state.submit(new FakeClient() as unknown as SegmentationClient))
      .rejects.toThrow(/nothing new/);
  });

  it("sends only the delta since the last submit", async () => {
    const state = makeState();
    const client = new FakeClient();
    state.addClick({ row: 1, col: 1, sign: "pos" });
    await state.submit(client as unknown as SegmentationClient);
    state.addClick({ row: 2, col: 2, sign: "neg" });
    await state.submit(client as unknown as SegmentationClient);
    expect(client.calls).toHaveLength(2);
    expect(client.calls[1].clicks).toEqual([{ row: 2, col: 2, sign: "neg" }]);
    expect(state.stepCounter).toBe(2);
  });

  it("verifies the server checksum against the local raster", async () => {
    const state = makeState();
    const client = new FakeClient();
    state.addStroke([{ row: 4, col: 2 }, { row: 4, col: 12 }], "pos", 0.6, false);
    const result = await state.submit(client as unknown as SegmentationClient);
    expect(result.checksumsVerified).toBe(true);
    expect(client.calls[0].scribbles?.pos_rle).toBeDefined();
  });

  it("softened strokes travel as PNG payloads", async () => {
    const state = makeState();
    const client = new FakeClient();
    state.addStroke([{ row: 4, col: 2 }, { row: 4, col: 12 }], "pos", 0.6, true);
    await state.submit(client as unknown as SegmentationClient);
    expect(client.calls[0].scribbles?.pos_png_b64).toBeDefined();
  });

  it("undo before submit simply drops the prompt", () => {
    const state = makeState();
    state.addClick({ row: 1, col: 1, sign: "pos" });
    expect(state.undo()).toBe(true);
    expect(state.canSubmit()).toBe(false);
  });

  it("undo past a submit forces reset + full replay", async () => {
    const state = makeState();
    const client = new FakeClient();
    state.addClick({ row: 1, col: 1, sign: "pos" });
    state.addClick({ row: 2, col: 2, sign: "pos" });
    await state.submit(client as unknown as SegmentationClient);
    expect(state.stepCounter).toBe(1);

    state.undo(); // removes an already-submitted prompt
    expect(state.canSubmit()).toBe(true);
    await state.submit(client as unknown as SegmentationClient);
    const replay = client.calls[1];
    expect(replay.reset).toBe(true);
    expect(replay.clicks).toEqual([{ row: 1, col: 1, sign: "pos" }]);
    expect(state.stepCounter).toBe(1); // server restarted its counter
  });

  it("undo stack replays to an identical raster state", () => {
    const a = makeState();
    a.addStroke([{ row: 2, col: 2 }, { row: 9, col: 9 }], "pos", 1.0, false);
    a.addStroke([{ row: 12, col: 3 }, { row: 12, col: 9 }], "neg", 1.0, false);
    a.addStroke([{ row: 14, col: 1 }, { row: 15, col: 2 }], "pos", 1.0, false);
    a.undo();

    const b = makeState();
    b.addStroke([{ row: 2, col: 2 }, { row: 9, col: 9 }], "pos", 1.0, false);
    b.addStroke([{ row: 12, col: 3 }, { row: 12, col: 9 }], "neg", 1.0, false);

    const ra = a.fullRasters();
    const rb = b.fullRasters();
    expect(Buffer.from(ra.pos.data).equals(Buffer.from(rb.pos.data))).toBe(true);
    expect(Buffer.from(ra.neg.data).equals(Buffer.from(rb.neg.data))).toBe(true);
  });
});
