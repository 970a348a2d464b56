import { TelemetryFrame } from "../src/types.js";

/** A plausible steady-state frame; overrides shape the case under test. */
export function frame(step: number, overrides: Partial<TelemetryFrame> = {}): TelemetryFrame {
  const t = step * 0.01;
  return {
    step,
    t,
    p_gen1: 2 / 3,
    p_gen2: 1 / 3,
    p_es_bus: 0,
    e_es: 8,
    soc_pct: 80,
    p_pr: 1,
    p_ppl: 0,
    i_gen1: (2 / 3 / 400) * 1000,
    i_gen2: (1 / 3 / 400) * 1000,
    i_es: 0,
    i_pr: 2.5,
    i_ppl: 0,
    mode: "Tracking",
    flags: "",
    ...overrides,
  };
}
