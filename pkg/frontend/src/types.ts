/**
 * Wire types for the live-service HTTP/JSON interface.
 *
 * A telemetry frame is one NDJSON line: the CSV trace columns plus the
 * step index. Numeric fields are kW, kJ, A, seconds; `mode` is the
 * dispatcher mode; `flags` is a `;`-joined token list (empty when clean).
 */

export interface TelemetryFrame {
  step: number;
  t: number;
  p_gen1: number;
  p_gen2: number;
  p_es_bus: number;
  e_es: number;
  soc_pct: number;
  p_pr: number;
  p_ppl: number;
  i_gen1: number;
  i_gen2: number;
  i_es: number;
  i_pr: number;
  i_ppl: number;
  mode: string;
  flags: string;
}

export const FRAME_NUMERIC_KEYS = [
  "step",
  "t",
  "p_gen1",
  "p_gen2",
  "p_es_bus",
  "e_es",
  "soc_pct",
  "p_pr",
  "p_ppl",
  "i_gen1",
  "i_gen2",
  "i_es",
  "i_pr",
  "i_ppl",
] as const;

export function isTelemetryFrame(value: unknown): value is TelemetryFrame {
  if (typeof value !== "object" || value === null) return false;
  const doc = value as Record<string, unknown>;
  for (const key of FRAME_NUMERIC_KEYS) {
    const v = doc[key];
    if (typeof v !== "number" || !Number.isFinite(v)) return false;
  }
  return typeof doc.mode === "string" && typeof doc.flags === "string";
}

export interface SessionInfo {
  id: string;
  status: "running" | "paused" | "finished";
  scenario: string;
  speed: number;
  step: number;
  t: number;
  error?: string;
}

export interface SessionState extends SessionInfo {
  frame: TelemetryFrame;
}

export interface CommandAck {
  status: "accepted";
  acked_at_step: number;
  applied_at_step: number;
}

export type OperatorCommand =
  | { action: "fire_pulse"; args: { peak: number; rate: number; hold: number } }
  | { action: "set_propulsion"; args: { target: number; rate: number } }
  | { action: "set_soc_ref"; args: { e_ref: number } }
  | { action: "pause"; args?: Record<string, never> }
  | { action: "resume"; args?: Record<string, never> };

/** Why a command did not go through, mapped from the HTTP status. */
export type RejectionKind = "busy" | "invalid" | "gone" | "network";

export type CommandOutcome =
  | { ok: true; ack: CommandAck }
  | { ok: false; kind: RejectionKind; detail: string };

/** Width of one trapezoidal pulse in seconds; the service holds the
 * pulse device busy for exactly this long after an accepted fire. */
export function pulseWidth(peak: number, rate: number, hold: number): number {
  return (2.0 * peak) / rate + hold;
}
