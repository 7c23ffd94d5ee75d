/**
 * Decoder parity: the browser decoders must reproduce the shared golden
 * vector corpus bit-for-bit (the server side generates and also verifies
 * the same corpus).
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { DecodeContext, decodeRect } from "../src/decoders.js";
import type { PixelFormat } from "../src/format.js";

const VECTORS_PATH = fileURLToPath(new URL("../../tests/golden/vectors.json", import.meta.url));

interface VectorRect {
  x: number;
  y: number;
  w: number;
  h: number;
  payload_b64: string;
}

interface Vector {
  name: string;
  encoding: number;
  width: number;
  height: number;
  format: {
    bits_per_pixel: number;
    depth: number;
    big_endian: boolean;
    true_color: boolean;
    red_max: number;
    green_max: number;
    blue_max: number;
    red_shift: number;
    green_shift: number;
    blue_shift: number;
  };
  rects: VectorRect[];
  expected_b64: string;
  stream_group?: string;
}

function loadVectors(): Vector[] {
  return JSON.parse(readFileSync(VECTORS_PATH, "utf-8"));
}

function toFormat(spec: Vector["format"]): PixelFormat {
  return {
    bitsPerPixel: spec.bits_per_pixel,
    depth: spec.depth,
    bigEndian: spec.big_endian,
    trueColor: spec.true_color,
    redMax: spec.red_max,
    greenMax: spec.green_max,
    blueMax: spec.blue_max,
    redShift: spec.red_shift,
    greenShift: spec.green_shift,
    blueShift: spec.blue_shift,
  };
}

function b64ToBytes(data: string): Uint8Array {
  return new Uint8Array(Buffer.from(data, "base64"));
}

function b64ToPixels(data: string): Uint32Array {
  const bytes = b64ToBytes(data);
  const out = new Uint32Array(bytes.length / 4);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  for (let i = 0; i < out.length; i++) out[i] = view.getUint32(i * 4, true);
  return out;
}

describe("decoder parity against the shared golden corpus", () => {
  const vectors = loadVectors();
  const contexts = new Map<string, DecodeContext>();

  it("covers every encoding and both pixel depths", () => {
    expect(new Set(vectors.map((v) => v.encoding))).toEqual(new Set([0, 2, 4, 5, 6, 7]));
    expect(new Set(vectors.map((v) => v.format.bits_per_pixel))).toEqual(new Set([16, 32]));
  });

  for (const vector of loadVectors()) {
    it(`decodes ${vector.name}`, () => {
      const fmt = toFormat(vector.format);
      let ctx: DecodeContext;
      if (vector.stream_group) {
        if (!contexts.has(vector.stream_group)) contexts.set(vector.stream_group, new DecodeContext());
        ctx = contexts.get(vector.stream_group)!;
      } else {
        ctx = new DecodeContext();
      }
      const out = new Uint32Array(vector.width * vector.height);
      for (const rect of vector.rects) {
        const grid = decodeRect(
          { x: rect.x, y: rect.y, w: rect.w, h: rect.h, encoding: vector.encoding, payload: b64ToBytes(rect.payload_b64) },
          fmt,
          ctx,
        );
        for (let row = 0; row < rect.h; row++) {
          out.set(grid.subarray(row * rect.w, (row + 1) * rect.w), (rect.y + row) * vector.width + rect.x);
        }
      }
      expect(out).toEqual(b64ToPixels(vector.expected_b64));
    });
  }
});

describe("decoder hardening", () => {
  it("rejects truncated payloads instead of over-reading", () => {
    const fmt = toFormat(loadVectors()[0]!.format);
    expect(() =>
      decodeRect(
        { x: 0, y: 0, w: 2, h: 2, encoding: 0, payload: new Uint8Array(7) },
        fmt,
        new DecodeContext(),
      ),
    ).toThrow(/length|truncated/);
  });

  it("rejects the JPEG control byte", () => {
    const fmt = toFormat(loadVectors()[0]!.format);
    expect(() =>
      decodeRect(
        { x: 0, y: 0, w: 2, h: 2, encoding: 7, payload: new Uint8Array([0x90, 0, 0, 0]) },
        fmt,
        new DecodeContext(),
      ),
    ).toThrow(/JPEG/);
  });
});
