/**
 * RFB 3.8 client: handshake (None or MAC security), encoding negotiation,
 * update parsing and input events.  The viewer keeps at most one
 * outstanding incremental update request at a time.
 */

import { ByteReader } from "./bytes.js";
import type { EncodedRect } from "./decoders.js";
import {
  DecodeContext,
  ENCODING_CORRE,
  ENCODING_HEXTILE,
  ENCODING_RAW,
  ENCODING_RRE,
  ENCODING_TIGHT,
  ENCODING_ZLIB,
  decodeRect,
  readCompactLength,
} from "./decoders.js";
import type { PixelFormat } from "./format.js";
import { bytesPerPixel, parsePixelFormat, tightPixelSize } from "./format.js";
import { CHANNEL_RFB, computeMac } from "./mac.js";
import type { WsByteStream } from "./stream.js";

const PROTOCOL_VERSION = "RFB 003.008\n";
const SECURITY_NONE = 1;
const SECURITY_MAC = 113;

export const KEY_BACK = 0xff08; // BackSpace keysym
export const KEY_HOME = 0xff50;
export const KEY_MENU = 0xff67;

function packU16(value: number): [number, number] {
  return [(value >> 8) & 0xff, value & 0xff];
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export class RfbConnection {
  readonly context = new DecodeContext();
  /** Framebuffer mirror, one uint32 pixel value per cell. */
  readonly mirror: Uint32Array;

  private constructor(
    private stream: WsByteStream,
    readonly width: number,
    readonly height: number,
    readonly format: PixelFormat,
    readonly name: string,
  ) {
    this.mirror = new Uint32Array(width * height);
  }

  static async connect(stream: WsByteStream, secret?: Uint8Array): Promise<RfbConnection> {
    const version = new TextDecoder().decode(await stream.readExactly(12));
    if (version !== PROTOCOL_VERSION) throw new Error(`unsupported server version ${version.trim()}`);
    stream.write(new TextEncoder().encode(PROTOCOL_VERSION));

    const count = (await stream.readExactly(1))[0]!;
    if (count === 0) {
      const reasonLen = new ByteReader(await stream.readExactly(4)).u32();
      const reason = new TextDecoder().decode(await stream.readExactly(reasonLen));
      throw new Error(`server refused handshake: ${reason}`);
    }
    const types = await stream.readExactly(count);
    if (types.includes(SECURITY_MAC) && secret) {
      stream.write(new Uint8Array([SECURITY_MAC]));
      const nonce = await stream.readExactly(16);
      stream.write(await computeMac(secret, nonce, CHANNEL_RFB));
    } else if (types.includes(SECURITY_NONE)) {
      stream.write(new Uint8Array([SECURITY_NONE]));
    } else {
      throw new Error("server requires a shared secret");
    }
    const result = new ByteReader(await stream.readExactly(4)).u32();
    if (result !== 0) {
      const reasonLen = new ByteReader(await stream.readExactly(4)).u32();
      const reason = new TextDecoder().decode(await stream.readExactly(reasonLen));
      throw new Error(`authentication failed: ${reason}`);
    }

    stream.write(new Uint8Array([1])); // ClientInit: shared session
    const init = new ByteReader(await stream.readExactly(24));
    const width = init.u16();
    const height = init.u16();
    const format = parsePixelFormat(init.take(16));
    const nameLen = init.u32();
    const name = new TextDecoder().decode(await stream.readExactly(nameLen));
    return new RfbConnection(stream, width, height, format, name);
  }

  setEncodings(prefs: number[]): void {
    const out = new Uint8Array(4 + 4 * prefs.length);
    out[0] = 2;
    [out[2], out[3]] = packU16(prefs.length);
    const view = new DataView(out.buffer);
    prefs.forEach((encoding, i) => view.setInt32(4 + 4 * i, encoding, false));
    this.stream.write(out);
  }

  requestUpdate(incremental: boolean, area?: Rect): void {
    const rect = area ?? { x: 0, y: 0, w: this.width, h: this.height };
    const out = new Uint8Array(10);
    out[0] = 3;
    out[1] = incremental ? 1 : 0;
    [out[2], out[3]] = packU16(rect.x);
    [out[4], out[5]] = packU16(rect.y);
    [out[6], out[7]] = packU16(rect.w);
    [out[8], out[9]] = packU16(rect.h);
    this.stream.write(out);
  }

  pointerEvent(x: number, y: number, buttons: number): void {
    const out = new Uint8Array(6);
    out[0] = 5;
    out[1] = buttons;
    [out[2], out[3]] = packU16(x);
    [out[4], out[5]] = packU16(y);
    this.stream.write(out);
  }

  keyEvent(keysym: number, down: boolean): void {
    const out = new Uint8Array(8);
    out[0] = 4;
    out[1] = down ? 1 : 0;
    const view = new DataView(out.buffer);
    view.setUint32(4, keysym, false);
    this.stream.write(out);
  }

  /** Read one FramebufferUpdate; rect payloads are sized per encoding. */
  async readUpdate(): Promise<EncodedRect[]> {
    const header = new ByteReader(await this.stream.readExactly(4));
    const messageType = header.u8();
    if (messageType !== 0) throw new Error(`unexpected server message type ${messageType}`);
    header.u8();
    const count = header.u16();
    const rects: EncodedRect[] = [];
    for (let i = 0; i < count; i++) {
      rects.push(await this.readRect());
    }
    return rects;
  }

  /** Decode rects into the mirror, in message order. */
  apply(rects: EncodedRect[]): void {
    for (const rect of rects) {
      const grid = decodeRect(rect, this.format, this.context);
      for (let row = 0; row < rect.h; row++) {
        this.mirror.set(
          grid.subarray(row * rect.w, (row + 1) * rect.w),
          (rect.y + row) * this.width + rect.x,
        );
      }
    }
  }

  close(): void {
    this.stream.close();
  }

  get closed(): boolean {
    return this.stream.isClosed;
  }

  private async readRect(): Promise<EncodedRect> {
    const head = new ByteReader(await this.stream.readExactly(12));
    const x = head.u16();
    const y = head.u16();
    const w = head.u16();
    const h = head.u16();
    const encoding = head.i32();
    const payload = await this.readPayload(encoding, w, h);
    return { x, y, w, h, encoding, payload };
  }

  private async readPayload(encoding: number, w: number, h: number): Promise<Uint8Array> {
    const fmt = this.format;
    const bpp = bytesPerPixel(fmt);
    switch (encoding) {
      case ENCODING_RAW:
        return this.stream.readExactly(w * h * bpp);
      case ENCODING_RRE:
        return this.readRrePayload(bpp, 8);
      case ENCODING_CORRE:
        return this.readRrePayload(bpp, 4);
      case ENCODING_HEXTILE:
        return this.readHextilePayload(w, h, bpp);
      case ENCODING_ZLIB: {
        const head = await this.stream.readExactly(4);
        const length = new ByteReader(head).u32();
        const body = await this.stream.readExactly(length);
        return concat(head, body);
      }
      case ENCODING_TIGHT:
        return this.readTightPayload(w, h);
      default:
        throw new Error(`cannot size unknown encoding ${encoding}`);
    }
  }

  private async readRrePayload(bpp: number, coordBytes: number): Promise<Uint8Array> {
    const head = await this.stream.readExactly(4 + bpp);
    const count = new ByteReader(head).u32();
    const body = await this.stream.readExactly(count * (bpp + coordBytes));
    return concat(head, body);
  }

  private async readHextilePayload(w: number, h: number, bpp: number): Promise<Uint8Array> {
    const parts: Uint8Array[] = [];
    for (let ty = 0; ty < h; ty += 16) {
      const th = Math.min(16, h - ty);
      for (let tx = 0; tx < w; tx += 16) {
        const tw = Math.min(16, w - tx);
        const maskByte = await this.stream.readExactly(1);
        parts.push(maskByte);
        const mask = maskByte[0]!;
        if (mask & 1) {
          parts.push(await this.stream.readExactly(tw * th * bpp));
          continue;
        }
        if (mask & 2) parts.push(await this.stream.readExactly(bpp));
        if (mask & 4) parts.push(await this.stream.readExactly(bpp));
        if (mask & 8) {
          const countByte = await this.stream.readExactly(1);
          parts.push(countByte);
          const per = mask & 16 ? bpp + 2 : 2;
          parts.push(await this.stream.readExactly(countByte[0]! * per));
        }
      }
    }
    return concatAll(parts);
  }

  private async readTightPayload(w: number, h: number): Promise<Uint8Array> {
    const parts: Uint8Array[] = [];
    const controlByte = await this.stream.readExactly(1);
    parts.push(controlByte);
    const control = controlByte[0]!;
    const psz = tightPixelSize(this.format);
    if (control & 0x80) {
      if (control >> 4 === 0x9) throw new Error("Tight JPEG sub-mode is not supported");
      parts.push(await this.stream.readExactly(psz));
      return concatAll(parts);
    }
    let filter = 0;
    if (control & 0x40) {
      const filterByte = await this.stream.readExactly(1);
      parts.push(filterByte);
      filter = filterByte[0]!;
    }
    let expected: number;
    if (filter === 0) {
      expected = w * h * psz;
    } else if (filter === 1) {
      const ncolorsByte = await this.stream.readExactly(1);
      parts.push(ncolorsByte);
      const ncolors = ncolorsByte[0]! + 1;
      parts.push(await this.stream.readExactly(ncolors * psz));
      expected = ncolors <= 2 ? ((w + 7) >> 3) * h : w * h;
    } else if (filter === 2) {
      expected = w * h * 3;
    } else {
      throw new Error(`unknown Tight filter ${filter}`);
    }
    if (expected < 12) {
      parts.push(await this.stream.readExactly(expected));
    } else {
      const lengthBytes: number[] = [];
      let byte = (await this.stream.readExactly(1))[0]!;
      lengthBytes.push(byte);
      if (byte & 0x80) {
        byte = (await this.stream.readExactly(1))[0]!;
        lengthBytes.push(byte);
        if (byte & 0x80) {
          byte = (await this.stream.readExactly(1))[0]!;
          lengthBytes.push(byte);
        }
      }
      parts.push(new Uint8Array(lengthBytes));
      const length = readCompactLength(new ByteReader(new Uint8Array(lengthBytes)));
      parts.push(await this.stream.readExactly(length));
    }
    return concatAll(parts);
  }
}

function concat(a: Uint8Array, b: Uint8Array): Uint8Array {
  const out = new Uint8Array(a.length + b.length);
  out.set(a, 0);
  out.set(b, a.length);
  return out;
}

function concatAll(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}
