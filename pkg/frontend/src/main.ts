/**
 * Operator console entry point: binds the live session to the panels.
 *
 * Connects to the service (same host, port 8787, unless ?service= says
 * otherwise), attaches to the first live session or creates one, then
 * streams telemetry into the ring while rendering on animation frames.
 * Commands post through ServiceClient and every outcome, including Busy
 * and validation rejections, is rendered inline.
 */

import { ServiceClient } from "./api.js";
import { StripChart, drawSocGauge, fmtValue } from "./chart.js";
import { ConsoleStore, FLAG_TOKENS } from "./state.js";
import { TelemetryStream } from "./stream.js";
import { SessionInfo, pulseWidth } from "./types.js";

const HISTORY_SPAN_S = 60;
const STATUS_POLL_MS = 2000;
const PULSE = { peak: 2.0, rate: 10.0, hold: 0.6 };
const PROPULSION_RATE_DEFAULT = 0.375;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function serviceBase(): string {
  const q = new URLSearchParams(location.search).get("service");
  if (q !== null) return q.replace(/\/+$/, "");
  if (location.protocol === "http:" || location.protocol === "https:") {
    return `${location.protocol}//${location.hostname}:8787`;
  }
  return "http://127.0.0.1:8787";
}

async function pickSession(client: ServiceClient): Promise<SessionInfo> {
  const wanted = new URLSearchParams(location.search).get("session");
  if (wanted !== null) return await client.getState(wanted);
  const sessions = await client.listSessions();
  const live = sessions.find((s) => s.status !== "finished");
  return live ?? (await client.createSession({ speed: 1.0 }));
}

class Console {
  private readonly store = new ConsoleStore(HISTORY_SPAN_S);
  private readonly charts: { chart: StripChart; ref: boolean }[];
  private session!: SessionInfo;
  private stream: TelemetryStream | null = null;
  private capacity = 10;
  private samplePeriod = 0.01;
  private fireInFlight = false;

  constructor(private readonly client: ServiceClient) {
    this.charts = [
      {
        chart: new StripChart(el("chart-loads") as unknown as HTMLCanvasElement, {
          title: "Loads",
          unit: "kW",
          includeZero: true,
          series: [
            { key: "p_pr", label: "propulsion", color: "#58a6ff" },
            { key: "p_ppl", label: "pulse", color: "#ff6b6b" },
          ],
        }),
        ref: false,
      },
      {
        chart: new StripChart(el("chart-power") as unknown as HTMLCanvasElement, {
          title: "Generation and storage",
          unit: "kW",
          includeZero: true,
          series: [
            { key: "p_gen1", label: "gen1", color: "#00e5a0" },
            { key: "p_gen2", label: "gen2", color: "#a78bfa" },
            { key: "p_es_bus", label: "storage", color: "#ffc23a" },
          ],
        }),
        ref: false,
      },
      {
        chart: new StripChart(el("chart-currents") as unknown as HTMLCanvasElement, {
          title: "Bus currents",
          unit: "A",
          includeZero: true,
          series: [
            { key: "i_gen1", label: "gen1", color: "#00e5a0" },
            { key: "i_gen2", label: "gen2", color: "#a78bfa" },
            { key: "i_es", label: "storage", color: "#ffc23a" },
            { key: "i_pr", label: "propulsion", color: "#58a6ff" },
            { key: "i_ppl", label: "pulse", color: "#ff6b6b" },
          ],
        }),
        ref: false,
      },
      {
        chart: new StripChart(el("chart-energy") as unknown as HTMLCanvasElement, {
          title: "Storage energy",
          unit: "kJ",
          refLabel: "ref",
          series: [{ key: "e_es", label: "energy", color: "#ffc23a" }],
        }),
        ref: true,
      },
    ];
    this.bindControls();
  }

  async run(): Promise<void> {
    for (;;) {
      try {
        this.session = await pickSession(this.client);
        break;
      } catch (err) {
        this.banner("reconnecting", `service unreachable at ${this.client.base} (${err})`);
        await new Promise((r) => setTimeout(r, 3000));
      }
    }
    this.store.setSession(this.session);
    this.stream = new TelemetryStream(this.client.telemetryUrl(this.session.id), {
      onFrame: (frame) => this.store.frameArrived(frame),
      onStatus: (status) => this.store.setConnection(status),
      onOverflow: () => this.store.overflowed(),
      shouldResume: async () => {
        try {
          const state = await this.client.getState(this.session.id);
          this.store.setSession(state);
          return state.status !== "finished";
        } catch {
          return true;
        }
      },
    });
    this.stream.start();
    setInterval(() => void this.pollStatus(), STATUS_POLL_MS);
    const tick = () => {
      this.render();
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  private async pollStatus(): Promise<void> {
    if (this.store.connection === "finished") return;
    try {
      const state = await this.client.getState(this.session.id);
      this.store.setSession(state);
    } catch {
      // stream-side backoff already drives the reconnecting banner
    }
  }

  // ---- commands ----

  private bindControls(): void {
    const fireBtn = el<HTMLButtonElement>("fire-btn");
    fireBtn.addEventListener("click", () => void this.fire());

    const slider = el<HTMLInputElement>("pr-slider");
    const sliderVal = el("pr-slider-val");
    slider.addEventListener("input", () => {
      sliderVal.textContent = `${Number(slider.value).toFixed(1)} kW`;
    });
    slider.addEventListener("change", () => void this.commitPropulsion());

    el<HTMLButtonElement>("soc-btn").addEventListener("click", () => void this.commitSocRef());
    el<HTMLButtonElement>("pause-btn").addEventListener("click", () => void this.togglePause());
  }

  private async fire(): Promise<void> {
    if (this.fireInFlight || !this.store.fireAllowed()) return;
    this.fireInFlight = true;
    const msg = el("fire-msg");
    msg.textContent = "";
    const id = this.store.commandSent(
      `fire_pulse ${PULSE.peak} kW @ ${PULSE.rate} kW/s, hold ${PULSE.hold} s`,
    );
    const outcome = await this.client.command(this.session.id, {
      action: "fire_pulse",
      args: { ...PULSE },
    });
    if (outcome.ok) {
      this.store.commandAccepted(id, outcome.ack);
      this.store.fireCommitted(
        outcome.ack.applied_at_step * this.samplePeriod,
        pulseWidth(PULSE.peak, PULSE.rate, PULSE.hold),
      );
    } else {
      this.store.commandRejected(id, outcome.kind, outcome.detail);
      msg.textContent = outcome.kind === "busy" ? `Busy: ${outcome.detail}` : outcome.detail;
    }
    this.fireInFlight = false;
  }

  private async commitPropulsion(): Promise<void> {
    const target = Number(el<HTMLInputElement>("pr-slider").value);
    const rate = Math.abs(Number(el<HTMLInputElement>("pr-rate").value)) || PROPULSION_RATE_DEFAULT;
    const id = this.store.commandSent(`set_propulsion ${target.toFixed(1)} kW @ ${rate} kW/s`);
    const outcome = await this.client.command(this.session.id, {
      action: "set_propulsion",
      args: { target, rate },
    });
    if (outcome.ok) this.store.commandAccepted(id, outcome.ack);
    else this.store.commandRejected(id, outcome.kind, outcome.detail);
  }

  private async commitSocRef(): Promise<void> {
    const input = el<HTMLInputElement>("soc-input");
    const eRef = Math.min(Math.max(Number(input.value), 0), this.capacity);
    input.value = String(eRef);
    const id = this.store.commandSent(`set_soc_ref ${eRef.toFixed(1)} kJ`);
    const outcome = await this.client.command(this.session.id, {
      action: "set_soc_ref",
      args: { e_ref: eRef },
    });
    if (outcome.ok) {
      this.store.commandAccepted(id, outcome.ack);
      this.store.referenceCommitted(eRef);
    } else {
      this.store.commandRejected(id, outcome.kind, outcome.detail);
    }
  }

  private async togglePause(): Promise<void> {
    const status = this.store.session?.status;
    if (status !== "running" && status !== "paused") return;
    const action = status === "running" ? "pause" : "resume";
    const id = this.store.commandSent(action);
    const outcome = await this.client.command(this.session.id, { action });
    if (outcome.ok) {
      this.store.commandAccepted(id, outcome.ack);
      void this.pollStatus();
    } else {
      this.store.commandRejected(id, outcome.kind, outcome.detail);
    }
  }

  // ---- rendering ----

  private render(): void {
    const latest = this.store.latest;
    if (latest !== null && latest.soc_pct > 0.01) {
      this.capacity = (latest.e_es * 100) / latest.soc_pct;
      el<HTMLInputElement>("soc-input").max = String(this.capacity);
    }
    if (this.store.ring.length >= 2) {
      const a = this.store.ring.at(this.store.ring.length - 2);
      const b = this.store.ring.at(this.store.ring.length - 1);
      if (b.step > a.step) this.samplePeriod = (b.t - a.t) / (b.step - a.step);
    }

    // controls reflect state every tick; charts only when dirty
    const fireBtn = el<HTMLButtonElement>("fire-btn");
    fireBtn.disabled = this.fireInFlight || !this.store.fireAllowed();
    const connected = this.store.connection === "connected";
    el<HTMLButtonElement>("soc-btn").disabled = !connected;
    el<HTMLInputElement>("pr-slider").disabled = !connected;
    const pauseBtn = el<HTMLButtonElement>("pause-btn");
    pauseBtn.disabled = this.store.connection === "finished";
    pauseBtn.textContent = this.store.session?.status === "paused" ? "Resume" : "Pause";

    if (!this.store.consumeDirty()) return;

    this.bannerFromStore();
    for (const { chart, ref } of this.charts) {
      chart.draw(this.store.ring, ref ? this.store.reference : null);
    }
    drawSocGauge(
      el("gauge") as unknown as HTMLCanvasElement,
      latest === null ? null : latest.soc_pct,
    );

    const pill = el("mode-pill");
    const mode = latest?.mode ?? "idle";
    pill.textContent = mode;
    pill.className = `pill mode-${mode.toLowerCase()}`;

    const badges = el("badges");
    badges.replaceChildren();
    const activeTokens = new Set(latest !== null && latest.flags ? latest.flags.split(";") : []);
    for (const token of FLAG_TOKENS) {
      const count = this.store.flagCounts[token];
      const badge = document.createElement("span");
      badge.className = `badge${activeTokens.has(token) ? " active" : count > 0 ? " seen" : ""}`;
      badge.textContent = `${token} ${count}`;
      badges.appendChild(badge);
    }
    if (this.store.overflows > 0) {
      const badge = document.createElement("span");
      badge.className = "badge seen";
      badge.textContent = `stream overflow ${this.store.overflows}`;
      badges.appendChild(badge);
    }

    const list = el("pending-list");
    list.replaceChildren();
    for (const cmd of this.store.pending) {
      const row = document.createElement("div");
      row.className = `cmd ${cmd.status}`;
      const mark = cmd.status === "accepted" ? "✓" : cmd.status === "rejected" ? "✗" : "…";
      row.textContent = `${mark} ${cmd.label}${cmd.detail ? `: ${cmd.detail}` : ""}`;
      list.appendChild(row);
    }

    el("readout").textContent =
      latest === null
        ? "awaiting data"
        : `t ${latest.t.toFixed(2)} s · step ${latest.step} · storage ${fmtValue(latest.e_es)} kJ`;
  }

  private bannerFromStore(): void {
    const text = {
      connecting: "connecting",
      connected: "live",
      reconnecting: "reconnecting",
      finished: "session finished",
    }[this.store.connection];
    const suffix = this.store.session?.error ? `: ${this.store.session.error}` : "";
    this.banner(this.store.connection, `${text}${suffix}`);
  }

  private banner(kind: string, text: string): void {
    const dot = el("conn-dot");
    dot.className = `dot ${kind}`;
    el("conn-text").textContent = text;
    const meta = this.store.session
      ? `${this.store.session.scenario} · ${this.store.session.id} · ×${this.store.session.speed}`
      : "";
    el("session-meta").textContent = meta;
  }
}

void new Console(new ServiceClient(serviceBase())).run();
