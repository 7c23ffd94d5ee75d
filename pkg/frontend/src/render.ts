/** Canvas painter: blits only the rects an update touched. */

import type { EncodedRect } from "./decoders.js";
import type { PixelFormat } from "./format.js";
import type { RfbConnection } from "./rfb.js";

export class ScreenRenderer {
  private ctx: CanvasRenderingContext2D;
  private lut: { r: Uint8Array; g: Uint8Array; b: Uint8Array } | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private width: number,
    private height: number,
    private fmt: PixelFormat,
  ) {
    canvas.width = width;
    canvas.height = height;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  /** Paint the regions the update touched, straight from the mirror. */
  blit(conn: RfbConnection, rects: EncodedRect[]): void {
    for (const rect of rects) {
      if (rect.w < 1 || rect.h < 1) continue;
      const image = this.ctx.createImageData(rect.w, rect.h);
      const data = image.data;
      const { redShift, greenShift, blueShift, redMax, greenMax, blueMax } = this.fmt;
      let out = 0;
      for (let row = 0; row < rect.h; row++) {
        const base = (rect.y + row) * this.width + rect.x;
        for (let col = 0; col < rect.w; col++) {
          const value = conn.mirror[base + col]!;
          data[out++] = Math.round((((value >>> redShift) & redMax) * 255) / redMax);
          data[out++] = Math.round((((value >>> greenShift) & greenMax) * 255) / greenMax);
          data[out++] = Math.round((((value >>> blueShift) & blueMax) * 255) / blueMax);
          data[out++] = 255;
        }
      }
      this.ctx.putImageData(image, rect.x, rect.y);
    }
  }
}
