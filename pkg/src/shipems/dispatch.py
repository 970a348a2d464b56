"""Ramp-sharing dispatch between generators and the storage device.

Every step, device managers exchange one record each over the control
network; the dispatcher aggregates them, classifies the load-ramp
demand against the total generator ramp capability, and splits the
generation ramp proportionally to each unit's ramp rating:

* demand above the aggregate up-limit: generators ramp at their
  maxima, storage covers the excess (discharge support);
* demand below the aggregate down-limit: generators ramp at their
  minima, storage absorbs the surplus;
* otherwise the predictive controller chooses the storage ramp to
  track the energy reference, and generators carry the remainder.

All bus-frame storage quantities are discharge-positive; the
controller works charge-positive.  The conversion p_chg = -p_es_bus
happens here and only here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .mpc import (
    AugmentedState,
    InfeasibleEnvelopeError,
    PredictionModel,
    StorageEnvelope,
    mpc_step,
)
from .qp import QpSolution


class ZeroAggregateLimitError(ValueError):
    """No generator ramp capability to distribute."""


class DuplicateSenderError(ValueError):
    """Two exchange records from the same sender in one step."""


class DispatchMode(Enum):
    TRACKING = "Tracking"
    SATURATED_UP = "SaturatedUp"
    SATURATED_DOWN = "SaturatedDown"


@dataclass(frozen=True)
class GeneratorRating:
    """Static limits of one generating unit (kW, kW/s)."""

    id: str
    p_min: float
    p_max: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ValueError(f"{self.id}: p_min must not exceed p_max")
        if not (self.r_min < 0.0 < self.r_max):
            raise ValueError(f"{self.id}: need r_min < 0 < r_max")


@dataclass(frozen=True)
class StorageRating:
    """Static limits of the energy storage device (kJ, kW)."""

    e_capacity: float
    p_abs_max: float
    e_ref: float
    e_initial: float

    def __post_init__(self):
        if self.e_capacity <= 0.0:
            raise ValueError("e_capacity must be positive")
        if self.p_abs_max <= 0.0:
            raise ValueError("p_abs_max must be positive")
        if not 0.0 <= self.e_ref <= self.e_capacity:
            raise ValueError("e_ref must lie in [0, e_capacity]")
        if not 0.0 <= self.e_initial <= self.e_capacity:
            raise ValueError("e_initial must lie in [0, e_capacity]")


@dataclass(frozen=True)
class ExchangeRecord:
    """One per-step message from a device energy manager.

    Exactly one field set is valid: a generator reports its output
    power, the storage reports energy, power and power change, a load
    broadcasts its power change for the step.
    """

    sender: str
    p_gen: float | None = None
    e_es: float | None = None
    p_es: float | None = None
    delta_p_es: float | None = None
    delta_p_load: float | None = None

    def __post_init__(self):
        gen = self.p_gen is not None
        sto = (
            self.e_es is not None
            or self.p_es is not None
            or self.delta_p_es is not None
        )
        sto_full = (
            self.e_es is not None
            and self.p_es is not None
            and self.delta_p_es is not None
        )
        load = self.delta_p_load is not None
        if gen + sto + load != 1:
            raise ValueError(f"{self.sender}: record must carry exactly one role")
        if sto and not sto_full:
            raise ValueError(f"{self.sender}: storage record needs all three fields")

    @classmethod
    def generator(cls, sender: str, p_gen: float) -> "ExchangeRecord":
        return cls(sender=sender, p_gen=p_gen)

    @classmethod
    def storage(
        cls, e_es: float, p_es: float, delta_p_es: float, sender: str = "ES"
    ) -> "ExchangeRecord":
        return cls(sender=sender, e_es=e_es, p_es=p_es, delta_p_es=delta_p_es)

    @classmethod
    def load(cls, sender: str, delta_p_load: float) -> "ExchangeRecord":
        return cls(sender=sender, delta_p_load=delta_p_load)

    @property
    def role(self) -> str:
        if self.p_gen is not None:
            return "generator"
        if self.delta_p_load is not None:
            return "load"
        return "storage"


@dataclass(frozen=True)
class AggregateView:
    """Dispatcher-side summary of one exchange round."""

    r_L: float
    p_L: float
    e_es: float
    p_es: float
    p_gen: dict[str, float]


class ExchangeBoard:
    """Accumulates exchange records into the dispatcher's world view.

    Load powers integrate the broadcast deltas; a load that stays
    silent for a step holds its last power.  Generator and storage
    measurements are replaced by each fresh record and held otherwise.
    """

    def __init__(
        self,
        T: float,
        load_powers: dict[str, float],
        gen_powers: dict[str, float],
        e_es: float,
        p_es: float = 0.0,
    ):
        self.T = T
        self._loads = dict(load_powers)
        self._gens = dict(gen_powers)
        self._e_es = e_es
        self._p_es = p_es

    def collect_exchange(self, records) -> AggregateView:
        seen: set[str] = set()
        delta_sum = 0.0
        for rec in records:
            if rec.sender in seen:
                raise DuplicateSenderError(f"duplicate record from {rec.sender}")
            seen.add(rec.sender)
            role = rec.role
            if role == "load":
                self._loads[rec.sender] = (
                    self._loads.get(rec.sender, 0.0) + rec.delta_p_load
                )
                delta_sum += rec.delta_p_load
            elif role == "generator":
                self._gens[rec.sender] = rec.p_gen
            else:
                self._e_es = rec.e_es
                self._p_es = rec.p_es
        return AggregateView(
            r_L=delta_sum / self.T,
            p_L=sum(self._loads.values()),
            e_es=self._e_es,
            p_es=self._p_es,
            p_gen=dict(self._gens),
        )


def classify_mode(r_L: float, gens) -> DispatchMode:
    """Load ramp against aggregate generator ramp capability.

    The boundary belongs to the tracking region on both sides.
    """
    if r_L > sum(g.r_max for g in gens):
        return DispatchMode.SATURATED_UP
    if r_L < sum(g.r_min for g in gens):
        return DispatchMode.SATURATED_DOWN
    return DispatchMode.TRACKING


def generator_weights(gens, direction: str) -> tuple[float, ...]:
    """Ramp shares proportional to each unit's limit in the direction."""
    if direction == "up":
        caps = [g.r_max for g in gens]
    elif direction == "down":
        caps = [abs(g.r_min) for g in gens]
    else:
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    total = sum(caps)
    if total <= 0.0:
        raise ZeroAggregateLimitError("no generator ramp capability")
    return tuple(c / total for c in caps)


def storage_envelope(
    r_L: float,
    p_L: float,
    gens,
    storage: StorageRating,
    p_gen_now: float,
    p_chg_now: float,
    e_ref: float | None = None,
) -> StorageEnvelope:
    """Charge-positive operating bounds for the controller.

    With p_chg = p_gen_total - p_L and generators confined to their
    static ratings, the storage can charge at most into the generation
    headroom and discharge at most into the load:

        p_chg in [sum p_min - p_L, sum p_max - p_L] cut to +-p_abs_max
        r_chg in [sum r_min - r_L, sum r_max - r_L]

    An empty power interval means the load is outside total system
    capability; that is reported, never clamped.
    """
    r_lo = sum(g.r_min for g in gens) - r_L
    r_hi = sum(g.r_max for g in gens) - r_L
    p_lo = max(sum(g.p_min for g in gens) - p_L, -storage.p_abs_max)
    p_hi = min(sum(g.p_max for g in gens) - p_L, storage.p_abs_max)
    if p_lo > p_hi:
        raise InfeasibleEnvelopeError(
            f"load {p_L:.6g} kW not coverable: storage power interval "
            f"[{p_lo:.6g}, {p_hi:.6g}] kW is empty (generators at "
            f"{p_gen_now:.6g} kW)"
        )
    if r_lo > r_hi:
        raise InfeasibleEnvelopeError(
            f"storage ramp interval [{r_lo:.6g}, {r_hi:.6g}] kW/s is empty"
        )
    return StorageEnvelope(
        p_chg_min=p_lo,
        p_chg_max=p_hi,
        r_chg_min=r_lo,
        r_chg_max=r_hi,
        e_min=0.0,
        e_max=storage.e_capacity,
        e_ref=storage.e_ref if e_ref is None else e_ref,
        p_chg_now=p_chg_now,
    )


@dataclass(frozen=True)
class DispatchCommand:
    """Per-step ramp and power commands, bus frame."""

    mode: DispatchMode
    r_gen: tuple[float, ...]
    r_es_bus: float
    p_gen_cmd: tuple[float, ...]
    p_es_expected: float
    qp: QpSolution | None = None


class Dispatcher:
    """Single control thread owning the generator power accumulators.

    Tracking of the storage energy reference stays off until the first
    reference command arrives; until then the tracking mode holds the
    storage ramp at zero and generators follow the load alone.
    """

    def __init__(
        self,
        gens,
        storage: StorageRating,
        model: PredictionModel,
        initial_p_gen,
        qp_tol: float = 1e-9,
        qp_max_iter: int | None = None,
    ):
        self.gens = list(gens)
        self.storage = storage
        self.model = model
        self.p_gen_cmd = [float(p) for p in initial_p_gen]
        if len(self.p_gen_cmd) != len(self.gens):
            raise ValueError("one initial power per generator required")
        self.qp_tol = qp_tol
        self.qp_max_iter = qp_max_iter
        self.e_ref = storage.e_ref
        self.soc_tracking = False
        self.qp_nonconverged = 0
        self.qp_relaxations = 0

    def set_soc_ref(self, e_ref: float):
        """Set the energy reference and enable tracking."""
        if not 0.0 <= e_ref <= self.storage.e_capacity:
            raise ValueError("e_ref must lie in [0, e_capacity]")
        self.e_ref = float(e_ref)
        self.soc_tracking = True

    def dispatch_step(self, view: AggregateView) -> DispatchCommand:
        mode = classify_mode(view.r_L, self.gens)
        sol: QpSolution | None = None
        if mode is DispatchMode.SATURATED_UP:
            r_raw = [g.r_max for g in self.gens]
        elif mode is DispatchMode.SATURATED_DOWN:
            r_raw = [g.r_min for g in self.gens]
        else:
            if self.soc_tracking:
                env = storage_envelope(
                    view.r_L,
                    view.p_L,
                    self.gens,
                    self.storage,
                    p_gen_now=sum(view.p_gen.values()),
                    p_chg_now=-view.p_es,
                    e_ref=self.e_ref,
                )
                x = AugmentedState(delta_e=self.model.T * -view.p_es, e=view.e_es)
                r_chg, sol = mpc_step(
                    self.model, x, env, tol=self.qp_tol, max_iter=self.qp_max_iter
                )
                if not sol.converged:
                    self.qp_nonconverged += 1
                if sol.state_rows_relaxed:
                    self.qp_relaxations += 1
            else:
                r_chg = 0.0
            r_total = view.r_L + r_chg
            weights = generator_weights(self.gens, "up" if r_total >= 0.0 else "down")
            r_raw = [w * r_total for w in weights]
        T = self.model.T
        r_gen = []
        for i, g in enumerate(self.gens):
            target = self.p_gen_cmd[i] + T * r_raw[i]
            clamped = min(max(target, g.p_min), g.p_max)
            # a power-cap clamp shifts the lost ramp onto the storage
            r_gen.append((clamped - self.p_gen_cmd[i]) / T)
            self.p_gen_cmd[i] = clamped
        r_es_bus = view.r_L - sum(r_gen)
        return DispatchCommand(
            mode=mode,
            r_gen=tuple(r_gen),
            r_es_bus=r_es_bus,
            p_gen_cmd=tuple(self.p_gen_cmd),
            p_es_expected=view.p_es + T * r_es_bus,
            qp=sol,
        )
