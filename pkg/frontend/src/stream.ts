/**
 * NDJSON telemetry ingestion with automatic reconnect.
 *
 * The service streams one JSON object per line and closes the response
 * when the session finishes or the subscriber falls behind (after an
 * overflow notice). Connection loss triggers retries with exponential
 * backoff; a clean close asks the owner whether the session is still
 * live before resubscribing. Malformed lines are dropped with a console
 * warning, never thrown.
 */

import { TelemetryFrame, isTelemetryFrame } from "./types.js";

/** Accumulates chunks and yields complete newline-terminated lines. */
export class LineSplitter {
  private tail = "";

  feed(chunk: string): string[] {
    this.tail += chunk;
    const lines = this.tail.split("\n");
    this.tail = lines.pop()!;
    return lines.filter((line) => line.length > 0);
  }

  /** Any unterminated trailing text (normally empty at stream end). */
  flush(): string {
    const rest = this.tail;
    this.tail = "";
    return rest;
  }
}

export const BACKOFF_BASE_MS = 250;
export const BACKOFF_CAP_MS = 5000;

export function backoffDelay(attempt: number): number {
  return Math.min(BACKOFF_BASE_MS * 2 ** Math.max(attempt, 0), BACKOFF_CAP_MS);
}

export type ParsedLine =
  | { kind: "frame"; frame: TelemetryFrame }
  | { kind: "overflow" }
  | { kind: "bad"; reason: string };

export function parseTelemetryLine(line: string): ParsedLine {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    return { kind: "bad", reason: "not JSON" };
  }
  if (isTelemetryFrame(doc)) return { kind: "frame", frame: doc };
  const err = doc as { error?: unknown };
  if (err && err.error === "overflow") return { kind: "overflow" };
  return { kind: "bad", reason: "not a telemetry frame" };
}

export type StreamStatus = "connected" | "reconnecting";

export interface StreamHandlers {
  onFrame(frame: TelemetryFrame): void;
  onStatus(status: StreamStatus): void;
  /** Called after the server closed the stream without error; return
   * false to stop for good (session finished). Defaults to resuming. */
  shouldResume?(): Promise<boolean> | boolean;
  onOverflow?(): void;
  onStop?(): void;
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class TelemetryStream {
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: StreamHandlers,
    private readonly fetchFn: typeof fetch = fetch,
    private readonly delay: (ms: number) => Promise<void> = sleep,
  ) {}

  start(): void {
    void this.run();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async run(): Promise<void> {
    let attempt = 0;
    while (!this.stopped) {
      let sawFrame = false;
      let cleanClose = false;
      try {
        this.controller = new AbortController();
        const response = await this.fetchFn(this.url, {
          signal: this.controller.signal,
        });
        if (!response.ok || response.body === null) {
          throw new Error(`telemetry endpoint answered ${response.status}`);
        }
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const splitter = new LineSplitter();
        for (;;) {
          const { value, done } = await reader.read();
          if (done) {
            cleanClose = true;
            break;
          }
          for (const line of splitter.feed(decoder.decode(value, { stream: true }))) {
            const parsed = parseTelemetryLine(line);
            if (parsed.kind === "frame") {
              if (!sawFrame) {
                sawFrame = true;
                attempt = 0;
                this.handlers.onStatus("connected");
              }
              this.handlers.onFrame(parsed.frame);
            } else if (parsed.kind === "overflow") {
              this.handlers.onOverflow?.();
            } else {
              console.warn(`dropped telemetry line (${parsed.reason})`);
            }
          }
        }
      } catch (err) {
        if (!this.stopped) console.warn("telemetry stream lost:", err);
      }
      if (this.stopped) break;
      if (cleanClose) {
        const resume = await (this.handlers.shouldResume?.() ?? true);
        if (!resume) break;
      }
      this.handlers.onStatus("reconnecting");
      await this.delay(backoffDelay(attempt));
      attempt += 1;
    }
    this.handlers.onStop?.();
  }
}
