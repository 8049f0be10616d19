/** Typed client for the segmentation service's /v1 JSON API. */

export interface ClickPrompt {
  row: number;
  col: number;
  sign: "pos" | "neg";
}

export interface BoxPrompt {
  row_min: number;
  col_min: number;
  row_max: number;
  col_max: number;
}

export interface ScribblePayload {
  pos_png_b64?: string;
  neg_png_b64?: string;
  pos_rle?: { runs: number[] };
  neg_rle?: { runs: number[] };
}

export interface PredictPayload {
  clicks?: ClickPrompt[];
  scribbles?: ScribblePayload;
  boxes?: BoxPrompt[];
  reset?: boolean;
}

export interface SessionInfo {
  session_id: string;
  height: number;
  width: number;
  model: string;
}

export interface PredictResponse {
  step_index: number;
  mask_png_b64: string;
  soft_mask_png_b64: string;
  logits_stats: { min: number; max: number; mean: number };
  scribble_checksums: Record<string, number>;
  logits_spg1_b64: string | null;
}

export interface ModelInfo {
  id: string;
  checksum: number;
  width: number;
  parameters: number;
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const step = 0x8000;
  for (let i = 0; i < bytes.length; i += step) {
    binary += String.fromCharCode(...bytes.subarray(i, i + step));
  }
  return btoa(binary);
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(`HTTP ${status}: ${message}`);
  }
}

export class SegmentationClient {
  constructor(public baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, text);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<{ version: string; models: number; warmup_seconds: number }> {
    return this.request("/v1/healthz");
  }

  models(): Promise<ModelInfo[]> {
    return this.request("/v1/models");
  }

  createSession(imagePng: Uint8Array, model?: string): Promise<SessionInfo> {
    return this.request("/v1/sessions", {
      method: "POST",
      body: JSON.stringify({
        image_png_b64: bytesToBase64(imagePng),
        ...(model ? { model } : {}),
      }),
    });
  }

  predict(
    sessionId: string,
    payload: PredictPayload,
    withLogits = false,
  ): Promise<PredictResponse> {
    const query = withLogits ? "?logits=1" : "";
    return this.request(`/v1/sessions/${sessionId}/predict${query}`, {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }
}
