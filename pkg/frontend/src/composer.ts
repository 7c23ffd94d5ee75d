/**
 * Multi-touch gesture composer: draw one stroke per finger on the overlay;
 * strokes become time-aligned tracks of a single composite input event that
 * the device applies as one atomic group.
 */

import type { Track } from "./cmd.js";

const SAMPLE_INTERVAL_MS = 1000 / 60;

interface Stroke {
  samples: Array<[number, number, number]>; // t_ms, x, y (t relative to stroke start)
  startedAt: number;
  lastSampleAt: number;
}

export class GestureComposer {
  private strokes: Stroke[] = [];
  private current: Stroke | null = null;
  armed = false;

  get trackCount(): number {
    return this.strokes.length + (this.current ? 1 : 0);
  }

  get isEmpty(): boolean {
    return this.trackCount === 0;
  }

  startStroke(x: number, y: number, now: number): void {
    this.current = { samples: [[0, x, y]], startedAt: now, lastSampleAt: now };
  }

  moveStroke(x: number, y: number, now: number): void {
    if (!this.current) return;
    if (now - this.current.lastSampleAt < SAMPLE_INTERVAL_MS) return;
    this.current.samples.push([Math.round(now - this.current.startedAt), x, y]);
    this.current.lastSampleAt = now;
  }

  endStroke(x: number, y: number, now: number): void {
    if (!this.current) return;
    this.current.samples.push([Math.max(1, Math.round(now - this.current.startedAt)), x, y]);
    this.strokes.push(this.current);
    this.current = null;
  }

  clear(): void {
    this.strokes = [];
    this.current = null;
  }

  /** All strokes rebased to t=0 so the gesture plays back simultaneously. */
  buildTracks(): { tracks: Track[]; durationMs: number } {
    let duration = 1;
    const tracks: Track[] = this.strokes.map((stroke, i) => {
      const last = stroke.samples[stroke.samples.length - 1]!;
      duration = Math.max(duration, last[0]);
      return { trackId: i + 1, samples: stroke.samples };
    });
    return { tracks, durationMs: duration };
  }

  drawPreview(ctx: CanvasRenderingContext2D, scale: number): void {
    ctx.lineWidth = 3;
    const palette = ["#ff5252", "#40c4ff", "#69f0ae", "#ffd740", "#b388ff"];
    const all = this.current ? [...this.strokes, this.current] : this.strokes;
    all.forEach((stroke, i) => {
      ctx.strokeStyle = palette[i % palette.length]!;
      ctx.beginPath();
      stroke.samples.forEach(([, x, y], j) => {
        if (j === 0) ctx.moveTo(x * scale, y * scale);
        else ctx.lineTo(x * scale, y * scale);
      });
      ctx.stroke();
      const first = stroke.samples[0]!;
      ctx.fillStyle = ctx.strokeStyle;
      ctx.beginPath();
      ctx.arc(first[1] * scale, first[2] * scale, 5, 0, Math.PI * 2);
      ctx.fill();
    });
  }
}
