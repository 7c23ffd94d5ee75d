import { describe, expect, it } from "vitest";

import { ByteReader } from "../src/bytes.js";
import { PayloadBuilder, PayloadParser } from "../src/cmd.js";
import { readCompactLength } from "../src/decoders.js";
import { WsByteStream } from "../src/stream.js";

describe("payload schema codec", () => {
  it("round-trips the flat binary primitives", () => {
    const payload = new PayloadBuilder()
      .u8(7)
      .u16(0xbeef)
      .u32(0xdeadbeef)
      .flag(true)
      .string("héllo wörld")
      .blob(new Uint8Array([1, 2, 3]))
      .done();
    const parser = new PayloadParser(payload);
    expect(parser.u8()).toBe(7);
    expect(parser.u16()).toBe(0xbeef);
    expect(parser.u32()).toBe(0xdeadbeef);
    expect(parser.flag()).toBe(true);
    expect(parser.string()).toBe("héllo wörld");
    expect(Array.from(parser.blob())).toEqual([1, 2, 3]);
    expect(parser.atEnd()).toBe(true);
  });

  it("throws on truncated strings", () => {
    const payload = new PayloadBuilder().u32(100).done();
    expect(() => new PayloadParser(payload).string()).toThrow(/truncated/);
  });
});

describe("compact lengths", () => {
  it("parses 1, 2 and 3 byte forms", () => {
    expect(readCompactLength(new ByteReader(new Uint8Array([0x05])))).toBe(5);
    expect(readCompactLength(new ByteReader(new Uint8Array([0x90, 0x01])))).toBe(144);
    expect(readCompactLength(new ByteReader(new Uint8Array([0xff, 0xff, 0x7f])))).toBe(0x1fffff);
  });
});

class FakeWebSocket {
  binaryType = "blob";
  readyState = 1;
  sent: Uint8Array[] = [];
  private listeners = new Map<string, Array<(event: any) => void>>();

  send(data: Uint8Array): void {
    this.sent.push(data);
  }

  close(): void {
    this.emit("close", {});
  }

  addEventListener(type: string, listener: (event: any) => void): void {
    const list = this.listeners.get(type) ?? [];
    list.push(listener);
    this.listeners.set(type, list);
  }

  emit(type: string, event: any): void {
    for (const listener of this.listeners.get(type) ?? []) listener(event);
  }

  deliver(bytes: number[]): void {
    this.emit("message", { data: new Uint8Array(bytes).buffer });
  }
}

describe("websocket byte stream", () => {
  it("reassembles reads across message boundaries", async () => {
    const ws = new FakeWebSocket();
    const stream = new WsByteStream(ws as any);
    ws.deliver([1, 2]);
    ws.deliver([3, 4, 5]);
    expect(Array.from(await stream.readExactly(4))).toEqual([1, 2, 3, 4]);
    ws.deliver([6]);
    expect(Array.from(await stream.readExactly(2))).toEqual([5, 6]);
  });

  it("fails pending reads when the socket closes", async () => {
    const ws = new FakeWebSocket();
    const stream = new WsByteStream(ws as any);
    const pending = stream.readExactly(4);
    ws.deliver([9]);
    ws.close();
    await expect(pending).rejects.toThrow(/closed/);
  });

  it("sets arraybuffer mode and forwards writes unchanged", () => {
    const ws = new FakeWebSocket();
    const stream = new WsByteStream(ws as any);
    expect(ws.binaryType).toBe("arraybuffer");
    stream.write(new Uint8Array([7, 8, 9]));
    expect(Array.from(ws.sent[0]!)).toEqual([7, 8, 9]);
  });
});
