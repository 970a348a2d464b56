"""Discrete plant: loads, ramp-limited generators, storage on the bus.

The storage device is the bus slack: whatever the loads draw beyond
what the generators produce comes out of (or goes into) the store.
Energy integrates forward-Euler at the controller period.  Clamp
events are flagged on the state, never silently absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dispatch import DispatchCommand, DispatchMode, StorageRating


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


@dataclass(frozen=True)
class PlantFlags:
    es_power_clamped: bool = False
    es_energy_clamped: bool = False
    gen_limit_hit: bool = False

    def tokens(self) -> str:
        parts = []
        if self.es_power_clamped:
            parts.append("es_power_clamped")
        if self.es_energy_clamped:
            parts.append("es_energy_clamped")
        if self.gen_limit_hit:
            parts.append("gen_limit_hit")
        return ";".join(parts)

    @classmethod
    def from_tokens(cls, text: str) -> "PlantFlags":
        parts = set(text.split(";")) if text else set()
        return cls(
            es_power_clamped="es_power_clamped" in parts,
            es_energy_clamped="es_energy_clamped" in parts,
            gen_limit_hit="gen_limit_hit" in parts,
        )


@dataclass(frozen=True)
class PlantState:
    t: float
    p_gen: tuple[float, ...]
    p_es_bus: float
    e_es: float
    p_pr: float
    p_ppl: float
    flags: PlantFlags = PlantFlags()
    imbalance: float = 0.0  # residual left when the ES power clamp engages


@dataclass(frozen=True)
class PulseTrain:
    """Trapezoidal pulse repeated count times every period seconds."""

    t_start: float
    count: int
    period: float
    peak: float
    rate: float
    hold: float

    def __post_init__(self):
        if self.count < 1 or self.count != int(self.count):
            raise ValueError("count must be a positive integer")
        if min(self.peak, self.rate, self.period) <= 0.0 or self.hold < 0.0:
            raise ValueError("peak, rate, period must be > 0 and hold >= 0")
        if self.count > 1 and self.period <= self.width:
            raise ValueError("pulses would overlap: period must exceed the pulse width")

    @property
    def rise(self) -> float:
        return self.peak / self.rate

    @property
    def width(self) -> float:
        return 2.0 * self.rise + self.hold

    @property
    def t_end(self) -> float:
        return self.t_start + (self.count - 1) * self.period + self.width

    def power(self, t: float) -> float:
        if t < self.t_start or t >= self.t_end:
            return 0.0
        k = min(int(math.floor((t - self.t_start) / self.period)), self.count - 1)
        tau = t - self.t_start - k * self.period
        rise = self.rise
        if tau < 0.0 or tau >= self.width:
            return 0.0
        if tau < rise:
            return self.rate * tau
        if tau < rise + self.hold:
            return self.peak
        return self.peak - self.rate * (tau - rise - self.hold)


class LoadModel:
    """Propulsion ramp plus an optional pulsed-power train.

    Propulsion moves toward its target at the commanded rate and
    arrives exactly, never overshooting.  The pulse train is a pure
    function of time once scheduled.
    """

    def __init__(self, p_pr: float = 0.0):
        if p_pr < 0.0:
            raise ValueError("initial propulsion power must be >= 0")
        self.p_pr = float(p_pr)
        self.target = float(p_pr)
        self.rate = 0.0
        self.p_ppl = 0.0
        self.train: PulseTrain | None = None

    def set_propulsion(self, target: float, rate: float):
        if target < 0.0 or rate <= 0.0:
            raise ValueError("need target >= 0 and rate > 0")
        self.target = float(target)
        self.rate = float(rate)

    def schedule_pulse_train(
        self,
        t_start: float,
        count: int,
        period: float,
        peak: float,
        rate: float,
        hold: float,
    ):
        self.train = PulseTrain(
            t_start=t_start, count=count, period=period, peak=peak, rate=rate, hold=hold
        )

    def pulse_busy(self, t: float) -> bool:
        """True while scheduled pulses remain; one device, one schedule."""
        return self.train is not None and t < self.train.t_end

    def advance(self, t_next: float, T: float):
        """Move one step; returns (p_pr, p_ppl, delta_p_pr, delta_p_ppl).

        Powers are the values holding over the step that ends at
        t_next; the deltas are this step's broadcast intent.
        """
        old_pr = self.p_pr
        self.p_pr += _clamp(self.target - self.p_pr, -self.rate * T, self.rate * T)
        old_ppl = self.p_ppl
        self.p_ppl = self.train.power(t_next) if self.train is not None else 0.0
        return self.p_pr, self.p_ppl, self.p_pr - old_pr, self.p_ppl - old_ppl


@dataclass(frozen=True)
class TelemetryFrame:
    step: int
    t: float
    p_gen1: float
    p_gen2: float
    p_es_bus: float
    e_es: float
    soc_pct: float
    p_pr: float
    p_ppl: float
    i_gen1: float
    i_gen2: float
    i_es: float
    i_pr: float
    i_ppl: float
    mode: str
    flags: str

    COLUMNS = (
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
        "mode",
        "flags",
    )

    def csv_row(self) -> str:
        def num(v: float) -> str:
            return f"{v + 0.0:.6f}"  # +0.0 folds away negative zero

        vals = [
            num(self.t),
            num(self.p_gen1),
            num(self.p_gen2),
            num(self.p_es_bus),
            num(self.e_es),
            num(self.soc_pct),
            num(self.p_pr),
            num(self.p_ppl),
            num(self.i_gen1),
            num(self.i_gen2),
            num(self.i_es),
            num(self.i_pr),
            num(self.i_ppl),
            self.mode,
            self.flags,
        ]
        return ",".join(vals)

    def json_dict(self) -> dict:
        return {
            "step": self.step,
            "t": self.t,
            "p_gen1": self.p_gen1,
            "p_gen2": self.p_gen2,
            "p_es_bus": self.p_es_bus,
            "e_es": self.e_es,
            "soc_pct": self.soc_pct,
            "p_pr": self.p_pr,
            "p_ppl": self.p_ppl,
            "i_gen1": self.i_gen1,
            "i_gen2": self.i_gen2,
            "i_es": self.i_es,
            "i_pr": self.i_pr,
            "i_ppl": self.i_ppl,
            "mode": self.mode,
            "flags": self.flags,
        }


class Plant:
    """Physical integration at the controller period."""

    def __init__(self, gens, storage: StorageRating, v_bus_nominal: float, T: float):
        if v_bus_nominal <= 0.0:
            raise ValueError("bus voltage must be positive")
        if T <= 0.0:
            raise ValueError("sampling time must be positive")
        self.gens = list(gens)
        self.storage = storage
        self.v_bus = float(v_bus_nominal)
        self.T = T

    def step(
        self,
        state: PlantState,
        cmd: DispatchCommand,
        p_pr: float,
        p_ppl: float,
        t_next: float | None = None,
    ) -> PlantState:
        T = self.T
        new_gen = []
        gen_hit = False
        for i, g in enumerate(self.gens):
            desired = cmd.p_gen_cmd[i]
            delta = _clamp(desired - state.p_gen[i], T * g.r_min, T * g.r_max)
            p = _clamp(state.p_gen[i] + delta, g.p_min, g.p_max)
            if abs(p - desired) > 1e-9:
                gen_hit = True
            new_gen.append(p)
        p_load = p_pr + p_ppl
        raw = p_load - sum(new_gen)  # storage is the slack device
        p_es = _clamp(raw, -self.storage.p_abs_max, self.storage.p_abs_max)
        power_clamped = p_es != raw
        e_raw = state.e_es + T * -p_es
        e = _clamp(e_raw, 0.0, self.storage.e_capacity)
        return PlantState(
            t=state.t + T if t_next is None else t_next,
            p_gen=tuple(new_gen),
            p_es_bus=p_es,
            e_es=e,
            p_pr=p_pr,
            p_ppl=p_ppl,
            flags=PlantFlags(
                es_power_clamped=power_clamped,
                es_energy_clamped=e != e_raw,
                gen_limit_hit=gen_hit,
            ),
            imbalance=raw - p_es,
        )

    def to_telemetry(
        self, state: PlantState, mode: DispatchMode, step: int
    ) -> TelemetryFrame:
        def amps(p_kw: float) -> float:
            return 1000.0 * p_kw / self.v_bus

        return TelemetryFrame(
            step=step,
            t=state.t,
            p_gen1=state.p_gen[0],
            p_gen2=state.p_gen[1],
            p_es_bus=state.p_es_bus,
            e_es=state.e_es,
            soc_pct=100.0 * state.e_es / self.storage.e_capacity,
            p_pr=state.p_pr,
            p_ppl=state.p_ppl,
            i_gen1=amps(state.p_gen[0]),
            i_gen2=amps(state.p_gen[1]),
            i_es=amps(state.p_es_bus),
            i_pr=amps(state.p_pr),
            i_ppl=amps(state.p_ppl),
            mode=mode.value if isinstance(mode, DispatchMode) else str(mode),
            flags=state.flags.tokens(),
        )


def initial_state(gens, storage: StorageRating, p_pr: float) -> PlantState:
    """Steady operating point: generators share the load by up-weights."""
    from .dispatch import generator_weights

    w = generator_weights(gens, "up")
    return PlantState(
        t=0.0,
        p_gen=tuple(wi * p_pr for wi in w),
        p_es_bus=0.0,
        e_es=storage.e_initial,
        p_pr=p_pr,
        p_ppl=0.0,
    )


__all__ = [
    "LoadModel",
    "Plant",
    "PlantFlags",
    "PlantState",
    "PulseTrain",
    "TelemetryFrame",
    "initial_state",
]
