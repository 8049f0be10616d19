/** Downloadable annotation bundle: a store-only ZIP of the sign-separated
 * stroke PNGs, prompt JSON files, and the final predicted mask. */

import { crc32 } from "./checksum.js";
import { encodeGrayPng } from "./png.js";
import type { CanvasState } from "./state.js";
import type { MaskGrid } from "./raster.js";

interface Entry {
  name: string;
  data: Uint8Array;
}

function u16(v: number): number[] {
  return [v & 0xff, (v >>> 8) & 0xff];
}

function u32(v: number): number[] {
  return [v & 0xff, (v >>> 8) & 0xff, (v >>> 16) & 0xff, (v >>> 24) & 0xff];
}

/** Store-method ZIP (no compression); deterministic timestamps. */
export function buildZip(entries: Entry[]): Uint8Array {
  const encoder = new TextEncoder();
  const localParts: number[] = [];
  const centralParts: number[] = [];
  let offset = 0;
  for (const entry of entries) {
    const name = encoder.encode(entry.name);
    const checksum = crc32(entry.data);
    const local = [
      ...u32(0x04034b50), ...u16(20), ...u16(0), ...u16(0),
      ...u16(0), ...u16(0x21), // fixed DOS time/date for reproducibility
      ...u32(checksum), ...u32(entry.data.length), ...u32(entry.data.length),
      ...u16(name.length), ...u16(0),
    ];
    localParts.push(...local, ...name, ...entry.data);
    centralParts.push(
      ...u32(0x02014b50), ...u16(20), ...u16(20), ...u16(0), ...u16(0),
      ...u16(0), ...u16(0x21),
      ...u32(checksum), ...u32(entry.data.length), ...u32(entry.data.length),
      ...u16(name.length), ...u16(0), ...u16(0), ...u16(0), ...u16(0),
      ...u32(0), ...u32(offset), ...name,
    );
    offset += local.length + name.length + entry.data.length;
  }
  const centralOffset = offset;
  const end = [
    ...u32(0x06054b50), ...u16(0), ...u16(0),
    ...u16(entries.length), ...u16(entries.length),
    ...u32(centralParts.length), ...u32(centralOffset), ...u16(0),
  ];
  return new Uint8Array([...localParts, ...centralParts, ...end]);
}

export interface ZipEntryView {
  name: string;
  data: Uint8Array;
}

/** Minimal reader for the store-only ZIPs this module writes. */
export function readZip(bytes: Uint8Array): ZipEntryView[] {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const out: ZipEntryView[] = [];
  let pos = 0;
  while (pos + 4 <= bytes.length && view.getUint32(pos, true) === 0x04034b50) {
    const size = view.getUint32(pos + 18, true);
    const nameLength = view.getUint16(pos + 26, true);
    const extraLength = view.getUint16(pos + 28, true);
    const name = new TextDecoder().decode(bytes.subarray(pos + 30, pos + 30 + nameLength));
    const start = pos + 30 + nameLength + extraLength;
    out.push({ name, data: bytes.slice(start, start + size) });
    pos = start + size;
  }
  return out;
}

export function exportAnnotationBundle(state: CanvasState, finalMask: MaskGrid | null): Uint8Array {
  if (state.promptCount() === 0) {
    throw new Error("nothing to export: no prompts in the session");
  }
  const { pos, neg, clicks, boxes } = state.fullRasters();
  const encoder = new TextEncoder();
  const entries: Entry[] = [
    { name: "scribbles_pos.png", data: encodeGrayPng(pos) },
    { name: "scribbles_neg.png", data: encodeGrayPng(neg) },
    { name: "clicks.json", data: encoder.encode(JSON.stringify(
      clicks.map((c) => ({ row: c.row, col: c.col, sign: c.sign })), null, 2)) },
    { name: "boxes.json", data: encoder.encode(JSON.stringify(boxes, null, 2)) },
  ];
  if (finalMask !== null) {
    entries.push({ name: "final_mask.png", data: encodeGrayPng(finalMask) });
  }
  return buildZip(entries);
}
