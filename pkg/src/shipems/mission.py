"""Batch mission execution: the control loop, metrics, trace files.

One engine step is one controller period: pending events fire, loads
announce their next-step powers, the exchange board aggregates, the
dispatcher allocates ramps, and the plant integrates.  The loop is
single threaded and fully deterministic; times are computed as
step_index * T (never accumulated) so the grid is exact.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass

from .dispatch import DispatchMode, Dispatcher, ExchangeBoard, ExchangeRecord
from .mpc import InfeasibleEnvelopeError, PredictionModel
from .plant import LoadModel, Plant, PlantFlags, TelemetryFrame, initial_state
from .scenario import MissionEvent, Scenario

TRACE_HEADER = ",".join(TelemetryFrame.COLUMNS)


class EmptyTraceError(ValueError):
    """Metrics were requested for a trace with no frames."""


@dataclass(frozen=True)
class MissionMetrics:
    final_e_es: float
    min_e_es: float
    max_e_es: float
    soc_tracking_rmse: float
    ramp_violations: int
    balance_violations: int
    clamp_events: int
    wall_time: float

    def json_dict(self) -> dict:
        return {
            "final_e_es": self.final_e_es,
            "min_e_es": self.min_e_es,
            "max_e_es": self.max_e_es,
            "soc_tracking_rmse": self.soc_tracking_rmse,
            "ramp_violations": self.ramp_violations,
            "balance_violations": self.balance_violations,
            "clamp_events": self.clamp_events,
            "wall_time": self.wall_time,
        }


class MissionEngine:
    """Steps one scenario forward a controller period at a time."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        ctl = scenario.controller
        self.T = ctl.T
        gens = list(scenario.generators)
        storage = scenario.storage
        self.model = PredictionModel.build(ctl.T, ctl.Np, ctl.Nc)
        self.plant = Plant(gens, storage, scenario.v_bus_nominal, ctl.T)
        self.loads = LoadModel(p_pr=scenario.initial_p_pr)
        self.state = initial_state(gens, storage, scenario.initial_p_pr)
        self.dispatcher = Dispatcher(
            gens,
            storage,
            self.model,
            initial_p_gen=self.state.p_gen,
            qp_tol=ctl.qp_tol,
            qp_max_iter=ctl.qp_max_iter,
        )
        self.board = ExchangeBoard(
            ctl.T,
            load_powers={"propulsion": scenario.initial_p_pr, "pulse": 0.0},
            gen_powers={g.id: p for g, p in zip(gens, self.state.p_gen)},
            e_es=storage.e_initial,
            p_es=0.0,
        )
        self.step_index = 0
        self.mode = DispatchMode.TRACKING
        self._prev_p_es = 0.0
        # events land on the step whose start time is nearest
        self._pending = deque(
            (round(ev.t / ctl.T), ev) for ev in scenario.events
        )

    @property
    def t(self) -> float:
        return self.step_index * self.T

    @property
    def finished(self) -> bool:
        return self.step_index >= self.scenario.n_steps

    def current_frame(self) -> TelemetryFrame:
        return self.plant.to_telemetry(self.state, self.mode, self.step_index)

    def apply_event(self, event: MissionEvent):
        if event.action == "set_propulsion":
            self.loads.set_propulsion(event.args["target"], event.args["rate"])
        elif event.action == "fire_pulse_train":
            self.loads.schedule_pulse_train(t_start=self.t, **event.args)
        elif event.action == "set_soc_ref":
            self.dispatcher.set_soc_ref(event.args["e_ref"])
        else:
            raise ValueError(f"unknown action {event.action!r}")

    def advance(self) -> TelemetryFrame:
        k = self.step_index
        while self._pending and self._pending[0][0] <= k:
            self.apply_event(self._pending.popleft()[1])
        t_next = (k + 1) * self.T
        p_pr, p_ppl, d_pr, d_ppl = self.loads.advance(t_next, self.T)
        records = [
            ExchangeRecord.load("propulsion", d_pr),
            ExchangeRecord.load("pulse", d_ppl),
            ExchangeRecord.storage(
                e_es=self.state.e_es,
                p_es=self.state.p_es_bus,
                delta_p_es=self.state.p_es_bus - self._prev_p_es,
            ),
        ]
        records.extend(
            ExchangeRecord.generator(g.id, p)
            for g, p in zip(self.plant.gens, self.state.p_gen)
        )
        view = self.board.collect_exchange(records)
        try:
            cmd = self.dispatcher.dispatch_step(view)
        except InfeasibleEnvelopeError as exc:
            raise InfeasibleEnvelopeError(f"t={self.t:.3f} s: {exc}") from exc
        self._prev_p_es = self.state.p_es_bus
        self.state = self.plant.step(self.state, cmd, p_pr, p_ppl, t_next=t_next)
        self.mode = cmd.mode
        self.step_index = k + 1
        return self.plant.to_telemetry(self.state, cmd.mode, self.step_index)

    def run(self) -> list[TelemetryFrame]:
        frames = [self.current_frame()]
        while not self.finished:
            frames.append(self.advance())
        return frames


def run_mission(scenario: Scenario) -> tuple[list[TelemetryFrame], MissionMetrics]:
    start = time.perf_counter()
    frames = MissionEngine(scenario).run()
    wall = time.perf_counter() - start
    return frames, compute_metrics(frames, scenario, wall_time=wall)


def reference_schedule(scenario: Scenario):
    """Active energy reference as a function of time.

    The rating's e_ref stands until the first set_soc_ref event, then
    each event replaces it from its own time onward.
    """
    changes = [
        (ev.t, ev.args["e_ref"])
        for ev in scenario.events
        if ev.action == "set_soc_ref"
    ]

    def ref_at(t: float) -> float:
        ref = scenario.storage.e_ref
        for t_ev, value in changes:
            if t >= t_ev - 1e-9:
                ref = value
            else:
                break
        return ref

    return ref_at


def compute_metrics(
    frames,
    scenario: Scenario,
    *,
    wall_time: float = 0.0,
    ramp_tol: float = 1e-9,
    balance_tol: float = 1e-9,
) -> MissionMetrics:
    """Violation counts and tracking error over a trace.

    A ramp violation is a generator step beyond T*r_max_i (or below
    T*r_min_i) by more than ramp_tol, counted per generator per step.
    Balance is checked only at frames where the storage power clamp
    did not fire.  clamp_events counts frames with any flag set.
    Traces re-read from CSV carry 1e-6 rounding; pass widened
    tolerances when recomputing from a file.
    """
    frames = list(frames)
    if not frames:
        raise EmptyTraceError("cannot compute metrics for an empty trace")
    T = scenario.controller.T
    g1, g2 = scenario.generators
    ref_at = reference_schedule(scenario)

    sq_sum = 0.0
    ramp_violations = 0
    balance_violations = 0
    clamp_events = 0
    prev = None
    for f in frames:
        sq_sum += (f.e_es - ref_at(f.t)) ** 2
        flags = PlantFlags.from_tokens(f.flags)
        if flags.es_power_clamped or flags.es_energy_clamped or flags.gen_limit_hit:
            clamp_events += 1
        if not flags.es_power_clamped:
            residual = f.p_gen1 + f.p_gen2 + f.p_es_bus - (f.p_pr + f.p_ppl)
            if abs(residual) > balance_tol:
                balance_violations += 1
        if prev is not None:
            for before, after, g in (
                (prev.p_gen1, f.p_gen1, g1),
                (prev.p_gen2, f.p_gen2, g2),
            ):
                step = after - before
                if step > T * g.r_max + ramp_tol or step < T * g.r_min - ramp_tol:
                    ramp_violations += 1
        prev = f
    energies = [f.e_es for f in frames]
    return MissionMetrics(
        final_e_es=energies[-1],
        min_e_es=min(energies),
        max_e_es=max(energies),
        soc_tracking_rmse=math.sqrt(sq_sum / len(frames)),
        ramp_violations=ramp_violations,
        balance_violations=balance_violations,
        clamp_events=clamp_events,
        wall_time=wall_time,
    )


def trace_lines(frames):
    yield TRACE_HEADER
    for f in frames:
        yield f.csv_row()


def write_trace(frames, destination):
    """CSV trace; destination is a path or a text file object."""
    text = "\n".join(trace_lines(frames)) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_trace(source) -> list[TelemetryFrame]:
    """Parse a trace written by write_trace back into frames."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("not a telemetry trace: bad or missing header")
    frames = []
    for step, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(TelemetryFrame.COLUMNS):
            raise ValueError(f"row {step + 1}: expected {len(TelemetryFrame.COLUMNS)} fields")
        nums = [float(p) for p in parts[:13]]
        frames.append(
            TelemetryFrame(
                step=step,
                t=nums[0],
                p_gen1=nums[1],
                p_gen2=nums[2],
                p_es_bus=nums[3],
                e_es=nums[4],
                soc_pct=nums[5],
                p_pr=nums[6],
                p_ppl=nums[7],
                i_gen1=nums[8],
                i_gen2=nums[9],
                i_es=nums[10],
                i_pr=nums[11],
                i_ppl=nums[12],
                mode=parts[13],
                flags=parts[14],
            )
        )
    return frames


__all__ = [
    "EmptyTraceError",
    "MissionEngine",
    "MissionMetrics",
    "TRACE_HEADER",
    "compute_metrics",
    "read_trace",
    "reference_schedule",
    "run_mission",
    "write_trace",
]
