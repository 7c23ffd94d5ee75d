/**
 * Byte-stream view over a WebSocket.  Inbound binary messages concatenate
 * into one stream; writes go out as single binary messages (the bridge is
 * byte-transparent in both directions).
 */

interface WebSocketLike {
  binaryType: string;
  readyState: number;
  send(data: Uint8Array): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
}

export class WsByteStream {
  private buffer: Uint8Array[] = [];
  private buffered = 0;
  private waiter: (() => void) | null = null;
  private closed = false;

  constructor(private ws: WebSocketLike) {
    ws.binaryType = "arraybuffer";
    ws.addEventListener("message", (event: MessageEvent) => {
      const data = event.data;
      if (data instanceof ArrayBuffer) {
        this.buffer.push(new Uint8Array(data));
        this.buffered += data.byteLength;
      }
      this.wake();
    });
    ws.addEventListener("close", () => {
      this.closed = true;
      this.wake();
    });
    ws.addEventListener("error", () => {
      this.closed = true;
      this.wake();
    });
  }

  private wake(): void {
    if (this.waiter) {
      const waiter = this.waiter;
      this.waiter = null;
      waiter();
    }
  }

  private async waitForData(): Promise<void> {
    await new Promise<void>((resolve) => {
      this.waiter = resolve;
    });
  }

  async readExactly(n: number): Promise<Uint8Array> {
    while (this.buffered < n) {
      if (this.closed) throw new Error("connection closed mid-read");
      await this.waitForData();
    }
    const out = new Uint8Array(n);
    let need = n;
    let off = 0;
    while (need > 0) {
      const head = this.buffer[0]!;
      if (head.length <= need) {
        out.set(head, off);
        off += head.length;
        need -= head.length;
        this.buffer.shift();
      } else {
        out.set(head.subarray(0, need), off);
        this.buffer[0] = head.subarray(need);
        need = 0;
      }
    }
    this.buffered -= n;
    return out;
  }

  write(data: Uint8Array): void {
    if (this.closed) throw new Error("connection is closed");
    this.ws.send(data);
  }

  close(): void {
    this.closed = true;
    try {
      this.ws.close();
    } catch {
      // already gone
    }
    this.wake();
  }

  get isClosed(): boolean {
    return this.closed;
  }
}

export function openWebSocketStream(url: string, factory?: (url: string) => WebSocketLike): Promise<WsByteStream> {
  const ws = factory ? factory(url) : (new WebSocket(url) as unknown as WebSocketLike);
  return new Promise((resolve, reject) => {
    const stream = new WsByteStream(ws);
    ws.addEventListener("open", () => resolve(stream));
    ws.addEventListener("error", () => reject(new Error(`cannot open ${url}`)));
  });
}
