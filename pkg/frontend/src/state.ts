/**
 * Console state: connection, session, frame history, pending commands.
 *
 * Pure bookkeeping with change notification; no DOM and no I/O, so the
 * whole store is unit-testable. Invariants: `latest` always equals the
 * newest ring entry; pending commands resolve exactly once; the FIRE
 * lockout follows the service's busy window for the commanded pulse.
 */

import { FrameRing } from "./ring.js";
import {
  CommandAck,
  RejectionKind,
  SessionInfo,
  TelemetryFrame,
} from "./types.js";

export type Connection = "connecting" | "connected" | "reconnecting" | "finished";

export interface PendingCommand {
  id: number;
  label: string;
  status: "sent" | "accepted" | "rejected";
  detail: string;
  appliedAtStep: number | null;
}

const PENDING_KEPT = 6;

/** Flag tokens counted as rising edges (frames where a flag turns on). */
export const FLAG_TOKENS = ["es_power_clamped", "es_energy_clamped", "gen_limit_hit"] as const;
export type FlagToken = (typeof FLAG_TOKENS)[number];

export class ConsoleStore {
  connection: Connection = "connecting";
  session: SessionInfo | null = null;
  readonly ring: FrameRing;
  /** Last operator-commanded SOC reference, kJ; null until one is set. */
  reference: number | null = null;
  pending: PendingCommand[] = [];
  flagCounts: Record<FlagToken, number> = {
    es_power_clamped: 0,
    es_energy_clamped: 0,
    gen_limit_hit: 0,
  };
  overflows = 0;

  private nextId = 1;
  private prevFlags = new Set<string>();
  private busyUntilT: number | null = null;
  private listeners: (() => void)[] = [];
  private dirty = false;

  constructor(spanSeconds = 60) {
    this.ring = new FrameRing(spanSeconds);
  }

  get latest(): TelemetryFrame | null {
    return this.ring.latest();
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  /** True when a redraw is owed; reading resets the flag. */
  consumeDirty(): boolean {
    const was = this.dirty;
    this.dirty = false;
    return was;
  }

  setConnection(connection: Connection): void {
    if (this.connection === connection) return;
    this.connection = connection;
    this.touch();
  }

  setSession(info: SessionInfo): void {
    if (this.session !== null && this.session.id !== info.id) {
      this.ring.clear();
      this.prevFlags.clear();
    }
    this.session = info;
    if (info.status === "finished") this.connection = "finished";
    this.touch();
  }

  frameArrived(frame: TelemetryFrame): void {
    if (!this.ring.push(frame)) return;
    const tokens = frame.flags.length > 0 ? frame.flags.split(";") : [];
    for (const token of tokens) {
      if (!this.prevFlags.has(token) && token in this.flagCounts) {
        this.flagCounts[token as FlagToken] += 1;
      }
    }
    this.prevFlags = new Set(tokens);
    this.touch();
  }

  overflowed(): void {
    this.overflows += 1;
    this.touch();
  }

  // ---- command lifecycle ----

  commandSent(label: string): number {
    const id = this.nextId++;
    this.pending.unshift({ id, label, status: "sent", detail: "", appliedAtStep: null });
    this.pending = this.pending.slice(0, PENDING_KEPT);
    this.touch();
    return id;
  }

  commandAccepted(id: number, ack: CommandAck): void {
    const entry = this.pending.find((p) => p.id === id);
    if (entry === undefined || entry.status !== "sent") return;
    entry.status = "accepted";
    entry.detail = `step ${ack.applied_at_step}`;
    entry.appliedAtStep = ack.applied_at_step;
    this.touch();
  }

  commandRejected(id: number, kind: RejectionKind, detail: string): void {
    const entry = this.pending.find((p) => p.id === id);
    if (entry === undefined || entry.status !== "sent") return;
    entry.status = "rejected";
    entry.detail = kind === "busy" ? `Busy: ${detail}` : detail;
    this.touch();
  }

  /** An accepted SOC reference moves the chart's reference line. */
  referenceCommitted(eRef: number): void {
    this.reference = eRef;
    this.touch();
  }

  /** An accepted fire locks the button for the pulse's busy window. */
  fireCommitted(atT: number, width: number): void {
    this.busyUntilT = atT + width;
    this.touch();
  }

  fireAllowed(): boolean {
    if (this.connection !== "connected") return false;
    if (this.busyUntilT === null) return true;
    const frame = this.latest;
    return frame !== null && frame.t >= this.busyUntilT;
  }

  private touch(): void {
    this.dirty = true;
    for (const fn of this.listeners) fn();
  }
}
