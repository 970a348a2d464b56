/**
 * Typed client for the live-service HTTP/JSON endpoints.
 *
 * Command rejections come back as values, not exceptions: 409 maps to
 * "busy", 400 to "invalid", 404 to "gone", and transport failures to
 * "network", so the UI can render every outcome inline.
 */

import {
  CommandAck,
  CommandOutcome,
  OperatorCommand,
  SessionInfo,
  SessionState,
} from "./types.js";

export interface CreateSessionOptions {
  scenario?: object | null;
  speed?: number;
  decimation?: number;
  paused?: boolean;
}

export class ServiceClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  telemetryUrl(sessionId: string): string {
    return `${this.base}/sessions/${sessionId}/telemetry`;
  }

  async createSession(options: CreateSessionOptions = {}): Promise<SessionInfo> {
    const response = await this.fetchFn(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(options),
    });
    if (!response.ok) throw new Error(await detailOf(response));
    return (await response.json()) as SessionInfo;
  }

  async listSessions(): Promise<SessionInfo[]> {
    const response = await this.fetchFn(`${this.base}/sessions`);
    if (!response.ok) throw new Error(await detailOf(response));
    return (await response.json()) as SessionInfo[];
  }

  async getState(sessionId: string): Promise<SessionState> {
    const response = await this.fetchFn(`${this.base}/sessions/${sessionId}/state`);
    if (!response.ok) throw new Error(await detailOf(response));
    return (await response.json()) as SessionState;
  }

  async command(sessionId: string, cmd: OperatorCommand): Promise<CommandOutcome> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}/sessions/${sessionId}/command`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(cmd),
      });
    } catch (err) {
      return { ok: false, kind: "network", detail: String(err) };
    }
    if (response.ok) {
      return { ok: true, ack: (await response.json()) as CommandAck };
    }
    const detail = await detailOf(response);
    if (response.status === 409) return { ok: false, kind: "busy", detail };
    if (response.status === 404) return { ok: false, kind: "gone", detail };
    return { ok: false, kind: "invalid", detail };
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const doc = (await response.json()) as { detail?: string; error?: string };
    return doc.detail ?? doc.error ?? `HTTP ${response.status}`;
  } catch {
    return `HTTP ${response.status}`;
  }
}
