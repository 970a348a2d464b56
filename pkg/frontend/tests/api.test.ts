import { describe, expect, it, vi } from "vitest";

import { ServiceClient } from "../src/api.js";

function jsonResponse(code: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status: code,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ServiceClient", () => {
  it("creates sessions with the requested options", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(201, { id: "s2", status: "running", scenario: "steady", speed: 3, step: 0, t: 0 }),
    );
    const client = new ServiceClient("http://h:1", fetchFn as unknown as typeof fetch);
    const info = await client.createSession({ speed: 3, paused: false });
    expect(info.id).toBe("s2");
    const [url, init] = fetchFn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://h:1/sessions");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({ speed: 3, paused: false });
  });

  it("returns the ack for an accepted command", async () => {
    const fetchFn = vi.fn(async () =>
      jsonResponse(200, { status: "accepted", acked_at_step: 41, applied_at_step: 42 }),
    );
    const client = new ServiceClient("http://h:1", fetchFn as unknown as typeof fetch);
    const outcome = await client.command("s1", {
      action: "fire_pulse",
      args: { peak: 2, rate: 10, hold: 0.6 },
    });
    expect(outcome.ok).toBe(true);
    if (outcome.ok) expect(outcome.ack.applied_at_step).toBe(42);
  });

  it.each([
    [409, "busy", "pulse train active"],
    [400, "invalid", "args.peak must be a number"],
    [404, "gone", "unknown session"],
  ])("maps HTTP %i to a %s rejection", async (code, kind, detail) => {
    const payload = code === 404 ? { error: detail } : { error: kind, detail };
    const fetchFn = vi.fn(async () => jsonResponse(code as number, payload));
    const client = new ServiceClient("http://h:1", fetchFn as unknown as typeof fetch);
    const outcome = await client.command("s1", { action: "pause" });
    expect(outcome.ok).toBe(false);
    if (!outcome.ok) {
      expect(outcome.kind).toBe(kind);
      expect(outcome.detail).toBe(detail);
    }
  });

  it("turns transport failures into network rejections instead of throwing", async () => {
    const fetchFn = vi.fn(async () => {
      throw new TypeError("fetch failed");
    });
    const client = new ServiceClient("http://h:1", fetchFn as unknown as typeof fetch);
    const outcome = await client.command("s1", { action: "resume" });
    expect(outcome.ok).toBe(false);
    if (!outcome.ok) expect(outcome.kind).toBe("network");
  });

  it("builds the telemetry URL from the base", () => {
    const client = new ServiceClient("http://host:8787");
    expect(client.telemetryUrl("s9")).toBe("http://host:8787/sessions/s9/telemetry");
  });
});
