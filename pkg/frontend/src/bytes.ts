import type { PixelFormat } from "./format.js";
import { bytesPerPixel, usesTpixel } from "./format.js";

/** Bounds-checked reader; over-reads throw instead of yielding garbage. */
export class ByteReader {
  private pos = 0;

  constructor(private data: Uint8Array) {}

  take(n: number): Uint8Array {
    if (n < 0 || this.pos + n > this.data.length) {
      throw new Error(`truncated payload: need ${n} bytes at ${this.pos} of ${this.data.length}`);
    }
    const out = this.data.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  u8(): number {
    return this.take(1)[0]!;
  }

  u16(): number {
    const b = this.take(2);
    return (b[0]! << 8) | b[1]!;
  }

  u32(): number {
    const b = this.take(4);
    return ((b[0]! << 24) | (b[1]! << 16) | (b[2]! << 8) | b[3]!) >>> 0;
  }

  i32(): number {
    return this.u32() | 0;
  }

  f64(): number {
    const b = this.take(8);
    return new DataView(b.buffer, b.byteOffset, 8).getFloat64(0, false);
  }

  remaining(): number {
    return this.data.length - this.pos;
  }

  atEnd(): boolean {
    return this.pos === this.data.length;
  }

  expectEnd(): void {
    if (!this.atEnd()) throw new Error(`${this.remaining()} trailing payload bytes`);
  }

  /** One pixel value in the format's own byte layout. */
  pixel(fmt: PixelFormat): number {
    const size = bytesPerPixel(fmt);
    const b = this.take(size);
    let value = 0;
    if (fmt.bigEndian) {
      for (let i = 0; i < size; i++) value = value * 256 + b[i]!;
    } else {
      for (let i = size - 1; i >= 0; i--) value = value * 256 + b[i]!;
    }
    return value >>> 0;
  }

  /** One pixel in Tight's wire form (3-byte TPIXEL or the normal layout). */
  tightPixel(fmt: PixelFormat): number {
    if (usesTpixel(fmt)) {
      const b = this.take(3);
      return (((b[0]! << fmt.redShift) | (b[1]! << fmt.greenShift) | (b[2]! << fmt.blueShift)) >>> 0);
    }
    return this.pixel(fmt);
  }
}

export function concatBytes(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

/** Decode little-endian/big-endian packed pixel bytes into values. */
export function bytesToPixels(data: Uint8Array, count: number, fmt: PixelFormat): Uint32Array {
  const size = bytesPerPixel(fmt);
  if (data.length !== count * size) {
    throw new Error(`pixel data length ${data.length} != ${count * size}`);
  }
  const out = new Uint32Array(count);
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const little = !fmt.bigEndian;
  for (let i = 0; i < count; i++) {
    if (size === 4) out[i] = view.getUint32(i * 4, little);
    else if (size === 2) out[i] = view.getUint16(i * 2, little);
    else out[i] = data[i]!;
  }
  return out;
}
