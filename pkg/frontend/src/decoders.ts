/**
 * Rectangle decoders for all negotiable encodings.  Each decoder consumes
 * one rect's payload and yields a Uint32Array of w*h pixel values in the
 * negotiated format — bit-identical to the server's own decoders, which the
 * shared golden-vector corpus enforces.
 */

import { ByteReader, bytesToPixels } from "./bytes.js";
import type { PixelFormat } from "./format.js";
import { bytesPerPixel, tightPixelSize, usesTpixel } from "./format.js";
import { InflateStream } from "./inflate.js";

export const ENCODING_RAW = 0;
export const ENCODING_RRE = 2;
export const ENCODING_CORRE = 4;
export const ENCODING_HEXTILE = 5;
export const ENCODING_ZLIB = 6;
export const ENCODING_TIGHT = 7;

export const ENCODING_NAMES: Record<number, string> = {
  [ENCODING_RAW]: "raw",
  [ENCODING_RRE]: "rre",
  [ENCODING_CORRE]: "corre",
  [ENCODING_HEXTILE]: "hextile",
  [ENCODING_ZLIB]: "zlib",
  [ENCODING_TIGHT]: "tight",
};

/** Per-connection decompression state: one Zlib stream, four Tight streams. */
export class DecodeContext {
  zlib: InflateStream | null = null;
  tight: (InflateStream | null)[] = [null, null, null, null];

  zlibStream(): InflateStream {
    if (!this.zlib) this.zlib = new InflateStream();
    return this.zlib;
  }

  tightStream(id: number): InflateStream {
    if (!this.tight[id]) this.tight[id] = new InflateStream();
    return this.tight[id]!;
  }

  resetTight(id: number): void {
    this.tight[id] = null;
  }
}

export interface EncodedRect {
  x: number;
  y: number;
  w: number;
  h: number;
  encoding: number;
  payload: Uint8Array;
}

export function decodeRect(rect: EncodedRect, fmt: PixelFormat, ctx: DecodeContext): Uint32Array {
  switch (rect.encoding) {
    case ENCODING_RAW:
      return decodeRaw(rect.payload, rect.w, rect.h, fmt);
    case ENCODING_RRE:
      return decodeRre(rect.payload, rect.w, rect.h, fmt, 2);
    case ENCODING_CORRE:
      return decodeRre(rect.payload, rect.w, rect.h, fmt, 1);
    case ENCODING_HEXTILE:
      return decodeHextile(rect.payload, rect.w, rect.h, fmt);
    case ENCODING_ZLIB:
      return decodeZlib(rect.payload, rect.w, rect.h, fmt, ctx);
    case ENCODING_TIGHT:
      return decodeTight(rect.payload, rect.w, rect.h, fmt, ctx);
    default:
      throw new Error(`unknown encoding ${rect.encoding}`);
  }
}

function decodeRaw(payload: Uint8Array, w: number, h: number, fmt: PixelFormat): Uint32Array {
  return bytesToPixels(payload, w * h, fmt);
}

function fillRect(
  grid: Uint32Array,
  stride: number,
  x: number,
  y: number,
  w: number,
  h: number,
  color: number,
): void {
  for (let row = y; row < y + h; row++) {
    grid.fill(color, row * stride + x, row * stride + x + w);
  }
}

function decodeRre(
  payload: Uint8Array,
  w: number,
  h: number,
  fmt: PixelFormat,
  coordBytes: 1 | 2,
): Uint32Array {
  const reader = new ByteReader(payload);
  const count = reader.u32();
  const background = reader.pixel(fmt);
  const grid = new Uint32Array(w * h).fill(background);
  for (let i = 0; i < count; i++) {
    const color = reader.pixel(fmt);
    const sx = coordBytes === 2 ? reader.u16() : reader.u8();
    const sy = coordBytes === 2 ? reader.u16() : reader.u8();
    const sw = coordBytes === 2 ? reader.u16() : reader.u8();
    const sh = coordBytes === 2 ? reader.u16() : reader.u8();
    if (sw < 1 || sh < 1 || sx + sw > w || sy + sh > h) {
      throw new Error(`RRE subrect (${sx},${sy},${sw},${sh}) exceeds ${w}x${h}`);
    }
    fillRect(grid, w, sx, sy, sw, sh, color);
  }
  reader.expectEnd();
  return grid;
}

const RAW_BIT = 1;
const BG_BIT = 2;
const FG_BIT = 4;
const SUBRECTS_BIT = 8;
const COLOURED_BIT = 16;

function decodeHextile(payload: Uint8Array, w: number, h: number, fmt: PixelFormat): Uint32Array {
  const reader = new ByteReader(payload);
  const grid = new Uint32Array(w * h);
  const bpp = bytesPerPixel(fmt);
  let bg: number | null = null;
  let fg: number | null = null;

  for (let ty = 0; ty < h; ty += 16) {
    const th = Math.min(16, h - ty);
    for (let tx = 0; tx < w; tx += 16) {
      const tw = Math.min(16, w - tx);
      const mask = reader.u8();
      if (mask & RAW_BIT) {
        const pixels = bytesToPixels(reader.take(tw * th * bpp), tw * th, fmt);
        for (let row = 0; row < th; row++) {
          grid.set(pixels.subarray(row * tw, (row + 1) * tw), (ty + row) * w + tx);
        }
        bg = null;
        fg = null;
        continue;
      }
      if (mask & BG_BIT) bg = reader.pixel(fmt);
      if (bg === null) throw new Error("hextile tile relies on undefined background");
      if (mask & FG_BIT) fg = reader.pixel(fmt);
      fillRect(grid, w, tx, ty, tw, th, bg);
      if (mask & SUBRECTS_BIT) {
        const count = reader.u8();
        const coloured = (mask & COLOURED_BIT) !== 0;
        for (let i = 0; i < count; i++) {
          let color: number;
          if (coloured) {
            color = reader.pixel(fmt);
          } else {
            if (fg === null) throw new Error("hextile subrect relies on undefined foreground");
            color = fg;
          }
          const xy = reader.u8();
          const wh = reader.u8();
          const sx = xy >> 4;
          const sy = xy & 0xf;
          const sw = (wh >> 4) + 1;
          const sh = (wh & 0xf) + 1;
          if (sx + sw > tw || sy + sh > th) {
            throw new Error(`hextile subrect (${sx},${sy},${sw},${sh}) exceeds ${tw}x${th} tile`);
          }
          fillRect(grid, w, tx + sx, ty + sy, sw, sh, color);
        }
        if (coloured) fg = null;
      }
    }
  }
  reader.expectEnd();
  return grid;
}

function decodeZlib(
  payload: Uint8Array,
  w: number,
  h: number,
  fmt: PixelFormat,
  ctx: DecodeContext,
): Uint32Array {
  const reader = new ByteReader(payload);
  const length = reader.u32();
  const compressed = reader.take(length);
  reader.expectEnd();
  const raw = ctx.zlibStream().push(compressed, w * h * bytesPerPixel(fmt));
  return bytesToPixels(raw, w * h, fmt);
}

const TIGHT_MIN_TO_COMPRESS = 12;
const TIGHT_FILTER_COPY = 0;
const TIGHT_FILTER_PALETTE = 1;
const TIGHT_FILTER_GRADIENT = 2;

export function readCompactLength(reader: ByteReader): number {
  const b0 = reader.u8();
  let value = b0 & 0x7f;
  if (b0 & 0x80) {
    const b1 = reader.u8();
    value |= (b1 & 0x7f) << 7;
    if (b1 & 0x80) {
      const b2 = reader.u8();
      if (b2 & 0x80) throw new Error("compact length longer than 3 bytes");
      value |= (b2 & 0x7f) << 14;
    }
  }
  return value;
}

function readFiltered(
  reader: ByteReader,
  ctx: DecodeContext,
  stream: number,
  expected: number,
): Uint8Array {
  if (expected < TIGHT_MIN_TO_COMPRESS) return reader.take(expected);
  const length = readCompactLength(reader);
  return ctx.tightStream(stream).push(reader.take(length), expected);
}

function tpixelsToGrid(data: Uint8Array, count: number, fmt: PixelFormat): Uint32Array {
  if (!usesTpixel(fmt)) return bytesToPixels(data, count, fmt);
  const out = new Uint32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] =
      ((data[i * 3]! << fmt.redShift) |
        (data[i * 3 + 1]! << fmt.greenShift) |
        (data[i * 3 + 2]! << fmt.blueShift)) >>>
      0;
  }
  return out;
}

function undoGradient(data: Uint8Array, w: number, h: number, fmt: PixelFormat): Uint32Array {
  if (!usesTpixel(fmt)) throw new Error("gradient filter requires the 24-bit pixel form");
  const channels = new Int32Array(w * h * 3);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      for (let c = 0; c < 3; c++) {
        const left = x > 0 ? channels[(y * w + x - 1) * 3 + c]! : 0;
        const above = y > 0 ? channels[((y - 1) * w + x) * 3 + c]! : 0;
        const corner = x > 0 && y > 0 ? channels[((y - 1) * w + x - 1) * 3 + c]! : 0;
        const prediction = Math.min(255, Math.max(0, left + above - corner));
        channels[(y * w + x) * 3 + c] = (data[(y * w + x) * 3 + c]! + prediction) & 0xff;
      }
    }
  }
  const out = new Uint32Array(w * h);
  for (let i = 0; i < w * h; i++) {
    out[i] =
      ((channels[i * 3]! << fmt.redShift) |
        (channels[i * 3 + 1]! << fmt.greenShift) |
        (channels[i * 3 + 2]! << fmt.blueShift)) >>>
      0;
  }
  return out;
}

function decodeTight(
  payload: Uint8Array,
  w: number,
  h: number,
  fmt: PixelFormat,
  ctx: DecodeContext,
): Uint32Array {
  const reader = new ByteReader(payload);
  const control = reader.u8();
  for (let i = 0; i < 4; i++) {
    if (control & (1 << i)) ctx.resetTight(i);
  }

  if (control & 0x80) {
    const nibble = control >> 4;
    if (nibble === 0x9) throw new Error("Tight JPEG sub-mode is not supported");
    if (nibble !== 0x8) throw new Error(`invalid Tight control byte 0x${control.toString(16)}`);
    const color = reader.tightPixel(fmt);
    reader.expectEnd();
    return new Uint32Array(w * h).fill(color);
  }

  const stream = (control >> 4) & 0x3;
  const filter = control & 0x40 ? reader.u8() : TIGHT_FILTER_COPY;
  let grid: Uint32Array;

  if (filter === TIGHT_FILTER_COPY) {
    const data = readFiltered(reader, ctx, stream, w * h * tightPixelSize(fmt));
    grid = tpixelsToGrid(data, w * h, fmt);
  } else if (filter === TIGHT_FILTER_PALETTE) {
    const ncolors = reader.u8() + 1;
    const palette = new Uint32Array(ncolors);
    for (let i = 0; i < ncolors; i++) palette[i] = reader.tightPixel(fmt);
    grid = new Uint32Array(w * h);
    if (ncolors <= 2) {
      const rowBytes = (w + 7) >> 3;
      const data = readFiltered(reader, ctx, stream, rowBytes * h);
      for (let y = 0; y < h; y++) {
        for (let x = 0; x < w; x++) {
          const bit = (data[y * rowBytes + (x >> 3)]! >> (7 - (x & 7))) & 1;
          grid[y * w + x] = palette[bit]!;
        }
      }
    } else {
      const data = readFiltered(reader, ctx, stream, w * h);
      for (let i = 0; i < w * h; i++) {
        const index = data[i]!;
        if (index >= ncolors) throw new Error("palette index out of range");
        grid[i] = palette[index]!;
      }
    }
  } else if (filter === TIGHT_FILTER_GRADIENT) {
    const data = readFiltered(reader, ctx, stream, w * h * 3);
    grid = undoGradient(data, w, h, fmt);
  } else {
    throw new Error(`unknown Tight filter ${filter}`);
  }
  reader.expectEnd();
  return grid;
}
