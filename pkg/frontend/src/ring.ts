/**
 * Time-windowed frame history.
 *
 * A circular buffer ordered by step index: pushes append at the tail,
 * frames older than the configured span fall off the head. Out-of-order
 * and duplicate steps are dropped so the history is strictly increasing.
 * Step jumps larger than the session stride (reconnects, overflow
 * disconnects) are remembered as gaps so charts can break their lines.
 */

import { TelemetryFrame } from "./types.js";

const INITIAL_CAPACITY = 1024;

export class FrameRing {
  readonly spanSeconds: number;

  private buf: (TelemetryFrame | undefined)[];
  private head = 0;
  private count = 0;
  private stride = Infinity; // smallest step delta seen; jumps beyond it are gaps
  private gapAfter = new Set<number>();

  constructor(spanSeconds = 60) {
    if (!(spanSeconds > 0)) throw new Error("span must be > 0 seconds");
    this.spanSeconds = spanSeconds;
    this.buf = new Array(INITIAL_CAPACITY);
  }

  get length(): number {
    return this.count;
  }

  /** Oldest-first access; index 0 is the oldest retained frame. */
  at(index: number): TelemetryFrame {
    if (index < 0 || index >= this.count) {
      throw new RangeError(`index ${index} out of range 0..${this.count - 1}`);
    }
    return this.buf[(this.head + index) % this.buf.length]!;
  }

  latest(): TelemetryFrame | null {
    return this.count === 0 ? null : this.at(this.count - 1);
  }

  /**
   * Append a frame. Returns false when the frame is dropped (step not
   * beyond the current newest).
   */
  push(frame: TelemetryFrame): boolean {
    const last = this.latest();
    if (last !== null) {
      const delta = frame.step - last.step;
      if (delta <= 0) return false;
      if (delta < this.stride) this.stride = delta;
      if (delta > this.stride) this.gapAfter.add(last.step);
    }
    if (this.count === this.buf.length) this.grow();
    this.buf[(this.head + this.count) % this.buf.length] = frame;
    this.count += 1;
    this.evictOlderThan(frame.t - this.spanSeconds);
    return true;
  }

  /** True when the stream jumped right after this step. */
  hasGapAfter(step: number): boolean {
    return this.gapAfter.has(step);
  }

  forEach(fn: (frame: TelemetryFrame, index: number) => void): void {
    for (let i = 0; i < this.count; i++) fn(this.at(i), i);
  }

  toArray(): TelemetryFrame[] {
    const out = new Array<TelemetryFrame>(this.count);
    this.forEach((f, i) => (out[i] = f));
    return out;
  }

  clear(): void {
    this.buf = new Array(INITIAL_CAPACITY);
    this.head = 0;
    this.count = 0;
    this.stride = Infinity;
    this.gapAfter.clear();
  }

  private evictOlderThan(tCut: number): void {
    while (this.count > 1) {
      const oldest = this.buf[this.head]!;
      if (oldest.t >= tCut) break;
      this.gapAfter.delete(oldest.step);
      this.buf[this.head] = undefined;
      this.head = (this.head + 1) % this.buf.length;
      this.count -= 1;
    }
  }

  private grow(): void {
    const next = new Array<TelemetryFrame | undefined>(this.buf.length * 2);
    for (let i = 0; i < this.count; i++) next[i] = this.at(i);
    this.buf = next;
    this.head = 0;
  }
}
