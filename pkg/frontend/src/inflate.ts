import { Inflate } from "pako";

import { concatBytes } from "./bytes.js";

const Z_SYNC_FLUSH = 2;

/**
 * One persistent DEFLATE decompressor (RFC 1950 framing), matching the
 * server side's per-rect sync-flushed stream.
 */
export class InflateStream {
  private inflator: Inflate;
  private chunks: Uint8Array[] = [];

  constructor() {
    this.inflator = new Inflate();
    this.inflator.onData = (chunk: Uint8Array) => {
      this.chunks.push(chunk);
    };
    this.inflator.onEnd = () => {};
  }

  /** Feed one rect's compressed bytes; exactly `expected` bytes must come out. */
  push(data: Uint8Array, expected: number): Uint8Array {
    this.chunks = [];
    this.inflator.push(data, Z_SYNC_FLUSH);
    if (this.inflator.err) {
      throw new Error(`inflate failed: ${this.inflator.msg || this.inflator.err}`);
    }
    const out = concatBytes(this.chunks);
    if (out.length !== expected) {
      throw new Error(`inflate produced ${out.length} bytes, expected ${expected}`);
    }
    return out;
  }
}
