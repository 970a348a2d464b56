import { describe, expect, it } from "vitest";

import { FrameRing } from "../src/ring.js";
import { frame } from "./helpers.js";

describe("FrameRing", () => {
  it("keeps frames ordered by step and reports the newest", () => {
    const ring = new FrameRing(60);
    for (let s = 0; s < 5; s++) ring.push(frame(s));
    expect(ring.length).toBe(5);
    expect(ring.at(0).step).toBe(0);
    expect(ring.latest()!.step).toBe(4);
    const steps: number[] = [];
    ring.forEach((f) => steps.push(f.step));
    expect(steps).toEqual([0, 1, 2, 3, 4]);
  });

  it("drops duplicates and out-of-order frames", () => {
    const ring = new FrameRing(60);
    expect(ring.push(frame(10))).toBe(true);
    expect(ring.push(frame(10))).toBe(false);
    expect(ring.push(frame(7))).toBe(false);
    expect(ring.length).toBe(1);
  });

  it("evicts frames older than the span behind the newest", () => {
    const ring = new FrameRing(2); // 2 s at T = 0.01 keeps 201 steps
    for (let s = 0; s <= 1000; s++) ring.push(frame(s));
    expect(ring.latest()!.step).toBe(1000);
    expect(ring.at(0).t).toBeGreaterThanOrEqual(ring.latest()!.t - 2);
    expect(ring.length).toBe(201);
  });

  it("grows past its initial capacity without losing order", () => {
    const ring = new FrameRing(60);
    for (let s = 0; s < 3000; s++) ring.push(frame(s));
    expect(ring.length).toBe(3000);
    for (let i = 1; i < ring.length; i++) {
      expect(ring.at(i).step).toBe(ring.at(i - 1).step + 1);
    }
  });

  it("marks a gap where the stream jumped", () => {
    const ring = new FrameRing(60);
    ring.push(frame(1));
    ring.push(frame(2));
    ring.push(frame(50)); // reconnect skipped 3..49
    ring.push(frame(51));
    expect(ring.hasGapAfter(2)).toBe(true);
    expect(ring.hasGapAfter(1)).toBe(false);
    expect(ring.hasGapAfter(50)).toBe(false);
  });

  it("treats a uniform decimated stride as gap-free", () => {
    const ring = new FrameRing(60);
    for (let s = 0; s <= 40; s += 4) ring.push(frame(s));
    for (let s = 0; s <= 40; s += 4) expect(ring.hasGapAfter(s)).toBe(false);
    ring.push(frame(100));
    expect(ring.hasGapAfter(40)).toBe(true);
  });

  it("forgets gaps once the frame before them is evicted", () => {
    const ring = new FrameRing(1);
    ring.push(frame(0));
    ring.push(frame(1));
    ring.push(frame(300)); // 3.00 s pushes frame 1 out of the 1 s window
    expect(ring.length).toBe(1);
    expect(ring.hasGapAfter(1)).toBe(false);
  });

  it("clear resets history and gap marks", () => {
    const ring = new FrameRing(60);
    ring.push(frame(0));
    ring.push(frame(9));
    ring.clear();
    expect(ring.length).toBe(0);
    expect(ring.latest()).toBeNull();
    expect(ring.hasGapAfter(0)).toBe(false);
    expect(ring.push(frame(0))).toBe(true);
  });
});
