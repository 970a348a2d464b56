"""Mission scenario documents: schema, validation, bundled default.

A scenario is a JSON document naming the plant ratings, controller
settings, and a time-sorted list of operator events.  Parsing is
strict: unknown keys are rejected, every error carries the document
path of the offending element, and a source line is attached on a
best-effort basis (the stdlib parser does not expose positions, so
lines are recovered by scanning for the key text).
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, field, replace

from .dispatch import GeneratorRating, StorageRating

DEFAULT_T = 0.01
DEFAULT_NP = 500
DEFAULT_NC = 1
DEFAULT_QP_TOL = 1e-9
DEFAULT_V_BUS = 400.0


class ScenarioError(ValueError):
    """Base for scenario document failures; carries path and line."""

    def __init__(self, message: str, path: str = "/", line: int | None = None):
        self.path = path
        self.line = line
        where = path if line is None else f"{path} (line {line})"
        super().__init__(f"{where}: {message}")


class ParseError(ScenarioError):
    """Document is not well-formed JSON."""


class SchemaError(ScenarioError):
    """Unknown key, missing required field, or wrong type."""


class ValidationError(ScenarioError):
    """Well-shaped document that breaks a scenario invariant."""


ACTIONS = {
    "set_propulsion": ("target", "rate"),
    "fire_pulse_train": ("count", "period", "peak", "rate", "hold"),
    "set_soc_ref": ("e_ref",),
}


@dataclass(frozen=True)
class ControllerConfig:
    T: float = DEFAULT_T
    Np: int = DEFAULT_NP
    Nc: int = DEFAULT_NC
    qp_tol: float = DEFAULT_QP_TOL
    qp_max_iter: int | None = None


@dataclass(frozen=True)
class MissionEvent:
    t: float
    action: str
    args: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    t_end: float
    v_bus_nominal: float
    controller: ControllerConfig
    generators: tuple[GeneratorRating, ...]
    storage: StorageRating
    initial_p_pr: float
    events: tuple[MissionEvent, ...]

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.controller.T)

    def truncated(self, t_end: float) -> "Scenario":
        """Copy covering only [0, t_end]; later events dropped."""
        return replace(
            self,
            t_end=t_end,
            events=tuple(ev for ev in self.events if ev.t < t_end),
        )


def _line_of(text: str, path: str) -> int | None:
    """Best-effort source line: walk the path's named keys in order."""
    pos = 0
    for part in path.strip("/").split("/"):
        if not part or part.isdigit():
            continue
        hit = text.find(f'"{part}"', pos)
        if hit < 0:
            return None
        pos = hit
    if pos == 0 and path != "/":
        return None
    return 1 + text.count("\n", 0, pos)


class _Walker:
    """Strict traversal of the decoded document."""

    def __init__(self, text: str):
        self.text = text

    def fail(self, cls, message: str, path: str):
        raise cls(message, path=path, line=_line_of(self.text, path))

    def mapping(self, value, path: str) -> dict:
        if not isinstance(value, dict):
            self.fail(SchemaError, f"expected an object, got {type(value).__name__}", path)
        return value

    def require(self, obj: dict, key: str, path: str):
        if key not in obj:
            self.fail(SchemaError, "missing required field", f"{path}/{key}".replace("//", "/"))
        return obj[key]

    def no_unknown(self, obj: dict, allowed, path: str):
        for key in obj:
            if key not in allowed:
                self.fail(SchemaError, f"unknown key {key!r}", f"{path}/{key}".replace("//", "/"))

    def number(self, value, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(SchemaError, f"expected a number, got {type(value).__name__}", path)
        out = float(value)
        if not math.isfinite(out):
            self.fail(ValidationError, "value must be finite", path)
        return out

    def integer(self, value, path: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(SchemaError, f"expected an integer, got {type(value).__name__}", path)
        return value

    def string(self, value, path: str) -> str:
        if not isinstance(value, str):
            self.fail(SchemaError, f"expected a string, got {type(value).__name__}", path)
        return value


def _parse_controller(w: _Walker, obj, path: str) -> ControllerConfig:
    obj = w.mapping(obj, path)
    w.no_unknown(obj, ("T", "Np", "Nc", "qp_tol", "qp_max_iter"), path)
    T = w.number(obj["T"], f"{path}/T") if "T" in obj else DEFAULT_T
    Np = w.integer(obj["Np"], f"{path}/Np") if "Np" in obj else DEFAULT_NP
    Nc = w.integer(obj["Nc"], f"{path}/Nc") if "Nc" in obj else DEFAULT_NC
    qp_tol = w.number(obj["qp_tol"], f"{path}/qp_tol") if "qp_tol" in obj else DEFAULT_QP_TOL
    qp_max_iter = None
    if obj.get("qp_max_iter") is not None:
        qp_max_iter = w.integer(obj["qp_max_iter"], f"{path}/qp_max_iter")
        if qp_max_iter < 1:
            w.fail(ValidationError, "qp_max_iter must be >= 1", f"{path}/qp_max_iter")
    if T <= 0.0:
        w.fail(ValidationError, "sampling time must be positive", f"{path}/T")
    if Nc < 1 or Np < Nc:
        w.fail(ValidationError, "need Np >= Nc >= 1", f"{path}/Np")
    if qp_tol <= 0.0:
        w.fail(ValidationError, "qp_tol must be positive", f"{path}/qp_tol")
    return ControllerConfig(T=T, Np=Np, Nc=Nc, qp_tol=qp_tol, qp_max_iter=qp_max_iter)


def _parse_generator(w: _Walker, obj, path: str) -> GeneratorRating:
    obj = w.mapping(obj, path)
    w.no_unknown(obj, ("id", "p_min", "p_max", "r_min", "r_max"), path)
    gid = w.string(w.require(obj, "id", path), f"{path}/id")
    vals = {k: w.number(w.require(obj, k, path), f"{path}/{k}") for k in ("p_min", "p_max", "r_min", "r_max")}
    try:
        return GeneratorRating(id=gid, **vals)
    except ValueError as exc:
        w.fail(ValidationError, str(exc), path)


def _parse_storage(w: _Walker, obj, path: str) -> StorageRating:
    obj = w.mapping(obj, path)
    w.no_unknown(obj, ("e_capacity", "p_abs_max", "e_ref", "e_initial"), path)
    vals = {k: w.number(w.require(obj, k, path), f"{path}/{k}") for k in ("e_capacity", "p_abs_max", "e_ref", "e_initial")}
    try:
        return StorageRating(**vals)
    except ValueError as exc:
        w.fail(ValidationError, str(exc), path)


def _parse_event(w: _Walker, obj, path: str, storage: StorageRating) -> MissionEvent:
    obj = w.mapping(obj, path)
    w.no_unknown(obj, ("t", "action", "args"), path)
    t = w.number(w.require(obj, "t", path), f"{path}/t")
    if t < 0.0:
        w.fail(ValidationError, "event time must be >= 0", f"{path}/t")
    action = w.string(w.require(obj, "action", path), f"{path}/action")
    if action not in ACTIONS:
        w.fail(SchemaError, f"unknown action {action!r}", f"{path}/action")
    args_obj = w.mapping(w.require(obj, "args", path), f"{path}/args")
    w.no_unknown(args_obj, ACTIONS[action], f"{path}/args")
    args: dict = {}
    for key in ACTIONS[action]:
        raw = w.require(args_obj, key, f"{path}/args")
        if key == "count":
            args[key] = w.integer(raw, f"{path}/args/{key}")
        else:
            args[key] = w.number(raw, f"{path}/args/{key}")
    apath = f"{path}/args"
    if action == "set_propulsion":
        if args["target"] < 0.0:
            w.fail(ValidationError, "target must be >= 0", f"{apath}/target")
        if args["rate"] <= 0.0:
            w.fail(ValidationError, "rate must be positive", f"{apath}/rate")
    elif action == "fire_pulse_train":
        if args["count"] < 1:
            w.fail(ValidationError, "count must be >= 1", f"{apath}/count")
        for key in ("period", "peak", "rate"):
            if args[key] <= 0.0:
                w.fail(ValidationError, f"{key} must be positive", f"{apath}/{key}")
        if args["hold"] < 0.0:
            w.fail(ValidationError, "hold must be >= 0", f"{apath}/hold")
        width = 2.0 * args["peak"] / args["rate"] + args["hold"]
        if args["count"] > 1 and args["period"] <= width:
            w.fail(ValidationError, "pulses would overlap: period must exceed pulse width", f"{apath}/period")
    elif action == "set_soc_ref":
        if not 0.0 <= args["e_ref"] <= storage.e_capacity:
            w.fail(ValidationError, "e_ref must lie within [0, e_capacity]", f"{apath}/e_ref")
    return MissionEvent(t=t, action=action, args=args)


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path="/", line=exc.lineno) from exc
    w = _Walker(text)
    root = w.mapping(doc, "/")
    w.no_unknown(
        root,
        ("name", "t_end", "v_bus_nominal", "controller", "generators", "storage", "initial", "events"),
        "/",
    )
    name = w.string(root["name"], "/name") if "name" in root else "unnamed"
    t_end = w.number(w.require(root, "t_end", "/"), "/t_end")
    if t_end <= 0.0:
        w.fail(ValidationError, "t_end must be positive", "/t_end")
    v_bus = w.number(root["v_bus_nominal"], "/v_bus_nominal") if "v_bus_nominal" in root else DEFAULT_V_BUS
    if v_bus <= 0.0:
        w.fail(ValidationError, "bus voltage must be positive", "/v_bus_nominal")
    controller = _parse_controller(w, root["controller"], "/controller") if "controller" in root else ControllerConfig()

    raw_gens = w.require(root, "generators", "/")
    if not isinstance(raw_gens, list):
        w.fail(SchemaError, "expected an array", "/generators")
    # trace format carries two generator columns
    if len(raw_gens) != 2:
        w.fail(ValidationError, f"exactly 2 generators required, got {len(raw_gens)}", "/generators")
    gens = tuple(_parse_generator(w, g, f"/generators/{i}") for i, g in enumerate(raw_gens))
    if gens[0].id == gens[1].id:
        w.fail(ValidationError, f"duplicate generator id {gens[0].id!r}", "/generators/1/id")

    storage = _parse_storage(w, w.require(root, "storage", "/"), "/storage")

    initial_p_pr = 0.0
    if "initial" in root:
        init = w.mapping(root["initial"], "/initial")
        w.no_unknown(init, ("p_pr",), "/initial")
        if "p_pr" in init:
            initial_p_pr = w.number(init["p_pr"], "/initial/p_pr")
            if initial_p_pr < 0.0:
                w.fail(ValidationError, "p_pr must be >= 0", "/initial/p_pr")

    events: list[MissionEvent] = []
    if "events" in root:
        raw_events = root["events"]
        if not isinstance(raw_events, list):
            w.fail(SchemaError, "expected an array", "/events")
        for i, raw in enumerate(raw_events):
            events.append(_parse_event(w, raw, f"/events/{i}", storage))
        for i in range(1, len(events)):
            if events[i].t < events[i - 1].t:
                w.fail(ValidationError, "events must be sorted by time", f"/events/{i}/t")

    return Scenario(
        name=name,
        t_end=t_end,
        v_bus_nominal=v_bus,
        controller=controller,
        generators=gens,
        storage=storage,
        initial_p_pr=initial_p_pr,
        events=tuple(events),
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def default_scenario() -> Scenario:
    """The bundled four-stage mission."""
    text = importlib.resources.files("shipems").joinpath("data/default_scenario.json").read_text()
    return parse_scenario(text)


__all__ = [
    "ACTIONS",
    "ControllerConfig",
    "MissionEvent",
    "ParseError",
    "Scenario",
    "ScenarioError",
    "SchemaError",
    "ValidationError",
    "default_scenario",
    "load_scenario",
    "parse_scenario",
]
