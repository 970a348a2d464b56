import { describe, expect, it, vi } from "vitest";

import {
  BACKOFF_CAP_MS,
  LineSplitter,
  TelemetryStream,
  backoffDelay,
  parseTelemetryLine,
} from "../src/stream.js";
import { TelemetryFrame } from "../src/types.js";
import { frame } from "./helpers.js";

function frameLine(step: number, overrides: Partial<TelemetryFrame> = {}): string {
  return JSON.stringify(frame(step, overrides)) + "\n";
}

/** One telemetry response whose body is the given chunks in order. */
function responseOf(...chunks: string[]): Response {
  const encoder = new TextEncoder();
  const body = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) controller.enqueue(encoder.encode(chunk));
      controller.close();
    },
  });
  return new Response(body, {
    status: 200,
    headers: { "Content-Type": "application/x-ndjson" },
  });
}

const noDelay = async () => {};

describe("LineSplitter", () => {
  it("reassembles lines split across chunk boundaries", () => {
    const splitter = new LineSplitter();
    expect(splitter.feed('{"a":')).toEqual([]);
    expect(splitter.feed('1}\n{"b":2}\n{"c"')).toEqual(['{"a":1}', '{"b":2}']);
    expect(splitter.feed(":3}\n")).toEqual(['{"c":3}']);
    expect(splitter.flush()).toBe("");
  });

  it("skips blank lines and keeps an unterminated tail", () => {
    const splitter = new LineSplitter();
    expect(splitter.feed("\n\nx")).toEqual([]);
    expect(splitter.flush()).toBe("x");
  });
});

describe("backoffDelay", () => {
  it("doubles from the base and saturates at the cap", () => {
    expect(backoffDelay(0)).toBe(250);
    expect(backoffDelay(1)).toBe(500);
    expect(backoffDelay(2)).toBe(1000);
    expect(backoffDelay(20)).toBe(BACKOFF_CAP_MS);
    expect(backoffDelay(-3)).toBe(250);
  });
});

describe("parseTelemetryLine", () => {
  it("accepts a full frame object", () => {
    const parsed = parseTelemetryLine(JSON.stringify(frame(7)));
    expect(parsed.kind).toBe("frame");
    if (parsed.kind === "frame") expect(parsed.frame.step).toBe(7);
  });

  it("recognizes the overflow notice", () => {
    expect(parseTelemetryLine('{"error":"overflow","disconnected":true}').kind).toBe("overflow");
  });

  it("rejects junk and incomplete objects", () => {
    expect(parseTelemetryLine("not json").kind).toBe("bad");
    expect(parseTelemetryLine('{"step":1}').kind).toBe("bad");
    expect(parseTelemetryLine('{"step":1,"t":"zero"}').kind).toBe("bad");
  });
});

describe("TelemetryStream", () => {
  it("delivers frames in order and stops when the owner declines to resume", async () => {
    const fetchFn = vi.fn(async () => responseOf(frameLine(0) + frameLine(1), frameLine(2)));
    const got: number[] = [];
    const statuses: string[] = [];
    await new Promise<void>((resolve) => {
      const stream = new TelemetryStream(
        "http://x/sessions/s1/telemetry",
        {
          onFrame: (f) => got.push(f.step),
          onStatus: (s) => statuses.push(s),
          shouldResume: () => false,
          onStop: resolve,
        },
        fetchFn as unknown as typeof fetch,
        noDelay,
      );
      stream.start();
    });
    expect(got).toEqual([0, 1, 2]);
    expect(statuses).toEqual(["connected"]);
    expect(fetchFn).toHaveBeenCalledTimes(1);
  });

  it("reconnects after a dropped connection and reports the status swing", async () => {
    let call = 0;
    const fetchFn = vi.fn(async () => {
      call += 1;
      if (call === 1) return responseOf(frameLine(0));
      return responseOf(frameLine(5), frameLine(6));
    });
    const got: number[] = [];
    const statuses: string[] = [];
    let resumes = 0;
    await new Promise<void>((resolve) => {
      const stream = new TelemetryStream(
        "http://x/t",
        {
          onFrame: (f) => got.push(f.step),
          onStatus: (s) => statuses.push(s),
          shouldResume: () => {
            resumes += 1;
            return resumes < 2; // first close resumes, second stops
          },
          onStop: resolve,
        },
        fetchFn as unknown as typeof fetch,
        noDelay,
      );
      stream.start();
    });
    expect(got).toEqual([0, 5, 6]);
    expect(statuses).toEqual(["connected", "reconnecting", "connected"]);
    expect(fetchFn).toHaveBeenCalledTimes(2);
  });

  it("drops malformed lines without losing the frames around them", async () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    try {
      const fetchFn = vi.fn(async () =>
        responseOf(frameLine(0) + "garbage\n" + frameLine(1)),
      );
      const got: number[] = [];
      await new Promise<void>((resolve) => {
        new TelemetryStream(
          "http://x/t",
          {
            onFrame: (f) => got.push(f.step),
            onStatus: () => {},
            shouldResume: () => false,
            onStop: resolve,
          },
          fetchFn as unknown as typeof fetch,
          noDelay,
        ).start();
      });
      expect(got).toEqual([0, 1]);
      expect(warn).toHaveBeenCalled();
    } finally {
      warn.mockRestore();
    }
  });

  it("signals overflow and treats the disconnect like any other close", async () => {
    let call = 0;
    const fetchFn = vi.fn(async () => {
      call += 1;
      if (call === 1) {
        return responseOf(frameLine(0) + '{"error":"overflow","disconnected":true}\n');
      }
      return responseOf(frameLine(10));
    });
    const got: number[] = [];
    let overflows = 0;
    let resumes = 0;
    await new Promise<void>((resolve) => {
      new TelemetryStream(
        "http://x/t",
        {
          onFrame: (f) => got.push(f.step),
          onStatus: () => {},
          onOverflow: () => (overflows += 1),
          shouldResume: () => {
            resumes += 1;
            return resumes < 2;
          },
          onStop: resolve,
        },
        fetchFn as unknown as typeof fetch,
        noDelay,
      ).start();
    });
    expect(overflows).toBe(1);
    expect(got).toEqual([0, 10]);
  });

  it("retries on HTTP errors until stopped", async () => {
    const warn = vi.spyOn(console, "warn").mockImplementation(() => {});
    try {
      const fetchFn = vi.fn(async () => new Response("nope", { status: 404 }));
      const statuses: string[] = [];
      let stopper!: TelemetryStream;
      await new Promise<void>((resolve) => {
        stopper = new TelemetryStream(
          "http://x/t",
          {
            onFrame: () => {},
            onStatus: (s) => {
              statuses.push(s);
              if (statuses.length === 3) stopper.stop();
            },
            onStop: resolve,
          },
          fetchFn as unknown as typeof fetch,
          noDelay,
        );
        stopper.start();
      });
      expect(statuses.every((s) => s === "reconnecting")).toBe(true);
      expect(fetchFn.mock.calls.length).toBeGreaterThanOrEqual(3);
    } finally {
      warn.mockRestore();
    }
  });
});
