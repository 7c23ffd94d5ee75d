/**
 * Command-channel client: the length-prefixed envelope protocol over a
 * byte stream, with typed helpers for every service opcode.
 */

import { ByteReader } from "./bytes.js";
import { CHANNEL_CMD, computeMac } from "./mac.js";
import type { WsByteStream } from "./stream.js";

export const OPCODES = {
  APP_LIST: 0x0101,
  APP_INSTALL: 0x0102,
  PROC_LIST: 0x0201,
  PROC_KILL: 0x0202,
  SHELL_EXEC: 0x0301,
  FS_LIST: 0x0401,
  FS_GET: 0x0402,
  FS_PUT: 0x0403,
  FS_REMOVE: 0x0404,
  STATUS_GET: 0x0501,
  SENSOR_READ: 0x0601,
  FIRMWARE_STAGE: 0x0701,
  INPUT_COMPOSITE: 0x0801,
  EVENT_ALERT: 0x0f01,
  ERROR: 0xffff,
} as const;

const FS_PUT_FIRST = 0x01;
const FS_PUT_MORE = 0x02;
const FS_CHUNK = 256 * 1024;

export class RemoteError extends Error {
  constructor(
    readonly code: number,
    message: string,
  ) {
    super(message);
  }
}

export class PayloadBuilder {
  private parts: Uint8Array[] = [];

  u8(v: number): this {
    this.parts.push(new Uint8Array([v & 0xff]));
    return this;
  }

  u16(v: number): this {
    this.parts.push(new Uint8Array([(v >> 8) & 0xff, v & 0xff]));
    return this;
  }

  u32(v: number): this {
    this.parts.push(new Uint8Array([(v >>> 24) & 0xff, (v >>> 16) & 0xff, (v >>> 8) & 0xff, v & 0xff]));
    return this;
  }

  flag(v: boolean): this {
    return this.u8(v ? 1 : 0);
  }

  string(v: string): this {
    return this.blob(new TextEncoder().encode(v));
  }

  blob(v: Uint8Array): this {
    this.u32(v.length);
    this.parts.push(v);
    return this;
  }

  done(): Uint8Array {
    const total = this.parts.reduce((n, p) => n + p.length, 0);
    const out = new Uint8Array(total);
    let off = 0;
    for (const p of this.parts) {
      out.set(p, off);
      off += p.length;
    }
    return out;
  }
}

export class PayloadParser extends ByteReader {
  string(): string {
    return new TextDecoder().decode(this.take(this.u32()));
  }

  blob(): Uint8Array {
    return this.take(this.u32());
  }

  flag(): boolean {
    return this.u8() !== 0;
  }
}

export interface AppRecord {
  package: string;
  name: string;
  version: string;
  running: boolean;
}

export interface ProcessRecord {
  pid: number;
  name: string;
  state: string;
  kind: string;
  package: string | null;
}

export interface FsNode {
  path: string;
  kind: "file" | "dir";
  size: number;
}

export interface StatusReport {
  battery: number;
  uptimeS: number;
  screenOn: boolean;
  network: string;
  alerts: string[];
}

export type Track = { trackId: number; samples: Array<[number, number, number]> };

export class CmdChannel {
  private nextCorrelation = 1;
  private pending: Promise<unknown> = Promise.resolve();
  readonly alerts: string[] = [];
  onAlert: ((message: string) => void) | null = null;

  private constructor(private stream: WsByteStream) {}

  static async connect(stream: WsByteStream, secret?: Uint8Array): Promise<CmdChannel> {
    const greeting = await stream.readExactly(7);
    const magic = new TextDecoder().decode(greeting.subarray(0, 5));
    if (magic !== "RFCMD") throw new Error(`bad command-channel greeting ${magic}`);
    const authMode = greeting[6]!;
    if (authMode === 1) {
      if (!secret) throw new Error("server requires a shared secret");
      const nonce = await stream.readExactly(16);
      stream.write(await computeMac(secret, nonce, CHANNEL_CMD));
      const result = (await stream.readExactly(1))[0]!;
      if (result !== 0) throw new Error("command channel authentication failed");
    }
    return new CmdChannel(stream);
  }

  /** One request at a time; alert events arriving in between are collected. */
  request(opcode: number, payload: Uint8Array = new Uint8Array(0)): Promise<Uint8Array> {
    const run = async (): Promise<Uint8Array> => {
      const correlation = this.nextCorrelation++;
      const envelope = new Uint8Array(10 + payload.length);
      const view = new DataView(envelope.buffer);
      view.setUint16(0, opcode, false);
      view.setUint32(2, correlation, false);
      view.setUint32(6, payload.length, false);
      envelope.set(payload, 10);
      this.stream.write(envelope);
      for (;;) {
        const head = new ByteReader(await this.stream.readExactly(10));
        const respOpcode = head.u16();
        const respCorrelation = head.u32();
        const length = head.u32();
        const body = length ? await this.stream.readExactly(length) : new Uint8Array(0);
        if (respOpcode === OPCODES.EVENT_ALERT && respCorrelation === 0) {
          this.recordAlert(body);
          continue;
        }
        if (respCorrelation !== correlation) {
          throw new Error(`correlation mismatch: got ${respCorrelation}, want ${correlation}`);
        }
        if (respOpcode === OPCODES.ERROR) {
          const parser = new PayloadParser(body);
          throw new RemoteError(parser.u16(), parser.string());
        }
        return body;
      }
    };
    const result = this.pending.then(run, run);
    this.pending = result.catch(() => undefined);
    return result;
  }

  private recordAlert(payload: Uint8Array): void {
    const message = new PayloadParser(payload).string();
    this.alerts.push(message);
    if (this.onAlert) this.onAlert(message);
  }

  /** Pull queued alert events while idle (non-blocking drain). */
  async poll(): Promise<void> {
    await this.request(OPCODES.STATUS_GET);
  }

  async listApps(runningOnly = false): Promise<AppRecord[]> {
    const body = await this.request(OPCODES.APP_LIST, new PayloadBuilder().flag(runningOnly).done());
    const parser = new PayloadParser(body);
    const count = parser.u32();
    const apps: AppRecord[] = [];
    for (let i = 0; i < count; i++) {
      apps.push({
        package: parser.string(),
        name: parser.string(),
        version: parser.string(),
        running: parser.flag(),
      });
    }
    return apps;
  }

  async installApp(pkg: string, version: string, blob: Uint8Array, overwrite = false): Promise<AppRecord> {
    const payload = new PayloadBuilder().string(pkg).string(version).flag(overwrite).blob(blob).done();
    const parser = new PayloadParser(await this.request(OPCODES.APP_INSTALL, payload));
    return {
      package: parser.string(),
      name: parser.string(),
      version: parser.string(),
      running: parser.flag(),
    };
  }

  async listProcesses(): Promise<ProcessRecord[]> {
    const parser = new PayloadParser(await this.request(OPCODES.PROC_LIST));
    const count = parser.u32();
    const processes: ProcessRecord[] = [];
    for (let i = 0; i < count; i++) {
      processes.push({
        pid: parser.u32(),
        name: parser.string(),
        state: parser.string(),
        kind: parser.string(),
        package: parser.string() || null,
      });
    }
    return processes;
  }

  async killProcess(pid: number): Promise<void> {
    await this.request(OPCODES.PROC_KILL, new PayloadBuilder().u32(pid).done());
  }

  async shellExec(command: string): Promise<{ exitCode: number; stdout: Uint8Array; stderr: Uint8Array }> {
    const parser = new PayloadParser(
      await this.request(OPCODES.SHELL_EXEC, new PayloadBuilder().string(command).done()),
    );
    return { exitCode: parser.i32(), stdout: parser.blob(), stderr: parser.blob() };
  }

  async fsList(path: string): Promise<FsNode[]> {
    const parser = new PayloadParser(
      await this.request(OPCODES.FS_LIST, new PayloadBuilder().string(path).done()),
    );
    const count = parser.u32();
    const nodes: FsNode[] = [];
    for (let i = 0; i < count; i++) {
      const nodePath = parser.string();
      const kind = parser.u8() ? "dir" : "file";
      const size = Number(readU64(parser));
      nodes.push({ path: nodePath, kind, size });
    }
    return nodes;
  }

  async fsGet(path: string): Promise<Uint8Array> {
    const parser = new PayloadParser(
      await this.request(OPCODES.FS_GET, new PayloadBuilder().string(path).done()),
    );
    return parser.blob();
  }

  async fsPut(path: string, data: Uint8Array): Promise<void> {
    let offset = 0;
    let first = true;
    do {
      const chunk = data.subarray(offset, offset + FS_CHUNK);
      offset += chunk.length;
      const more = offset < data.length;
      const flags = (first ? FS_PUT_FIRST : 0) | (more ? FS_PUT_MORE : 0);
      const payload = new PayloadBuilder().string(path).u8(flags).blob(chunk).done();
      await this.request(OPCODES.FS_PUT, payload);
      first = false;
      if (!more) break;
    } while (offset <= data.length);
  }

  async fsRemove(path: string, recursive = false): Promise<void> {
    await this.request(OPCODES.FS_REMOVE, new PayloadBuilder().string(path).flag(recursive).done());
  }

  async status(): Promise<StatusReport> {
    const parser = new PayloadParser(await this.request(OPCODES.STATUS_GET));
    const battery = parser.u8();
    const uptimeS = Number(readU64(parser));
    const screenOn = parser.flag();
    const network = parser.string();
    const count = parser.u32();
    const alerts: string[] = [];
    for (let i = 0; i < count; i++) alerts.push(parser.string());
    return { battery, uptimeS, screenOn, network, alerts };
  }

  async sensorRead(kind: string): Promise<{ tMs: number; values: number[] }> {
    const parser = new PayloadParser(
      await this.request(OPCODES.SENSOR_READ, new PayloadBuilder().string(kind).done()),
    );
    const tMs = parser.f64();
    const count = parser.u32();
    const values: number[] = [];
    for (let i = 0; i < count; i++) values.push(parser.f64());
    return { tMs, values };
  }

  /** Grouped multi-touch gesture; resolves to the group id the log assigned. */
  async compositeInput(tracks: Track[], durationMs: number): Promise<number> {
    const builder = new PayloadBuilder().u32(durationMs).u32(tracks.length);
    for (const track of tracks) {
      builder.u32(track.trackId).u32(track.samples.length);
      for (const [tMs, x, y] of track.samples) {
        builder.u32(tMs).u16(x).u16(y);
      }
    }
    const parser = new PayloadParser(await this.request(OPCODES.INPUT_COMPOSITE, builder.done()));
    return parser.u32();
  }

  close(): void {
    this.stream.close();
  }
}

function readU64(parser: PayloadParser): bigint {
  const bytes = parser.take(8);
  let value = 0n;
  for (const b of bytes) value = (value << 8n) | BigInt(b);
  return value;
}
