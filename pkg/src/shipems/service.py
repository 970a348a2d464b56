"""Paced mission sessions behind an HTTP/JSON interface.

A Session owns one control loop thread stepping the engine every
T/speed seconds of wall time. Operator commands are queued by HTTP
handler threads and drained only at step boundaries, so a command
acknowledged at step k takes effect in frame k+1 exactly. Telemetry
fans out to bounded per-subscriber queues; a subscriber that stops
reading is disconnected with an overflow notice instead of stalling
the loop.
"""

from __future__ import annotations

import json
import queue
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .mission import MissionEngine
from .plant import TelemetryFrame
from .scenario import MissionEvent, Scenario, ScenarioError, default_scenario, parse_scenario

COMMAND_TIMEOUT = 5.0
SUBSCRIBER_BUFFER = 2048

_CLOSE = object()
_OVERFLOW = object()


class UnknownSessionError(KeyError):
    pass


class BusyError(RuntimeError):
    pass


class CommandError(ValueError):
    pass


class _Pending:
    """A queued command awaiting application at a step boundary."""

    __slots__ = ("action", "args", "step", "error", "done")

    def __init__(self, action: str, args: dict):
        self.action = action
        self.args = args
        self.step: int | None = None
        self.error: Exception | None = None
        self.done = threading.Event()


class _Subscriber:
    __slots__ = ("q",)

    def __init__(self, maxsize: int):
        self.q: queue.Queue = queue.Queue(maxsize=maxsize)


def _require_number(args: dict, key: str) -> float:
    value = args.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CommandError(f"args.{key} must be a number")
    return float(value)


class Session:
    """One paced mission with queued commands and telemetry fan-out."""

    def __init__(
        self,
        session_id: str,
        scenario: Scenario,
        speed: float = 1.0,
        decimation: int = 1,
        buffer: int = SUBSCRIBER_BUFFER,
        script: dict[int, list[tuple[str, dict]]] | None = None,
        paused: bool = False,
    ):
        if not speed > 0.0:
            raise CommandError("speed must be > 0")
        if not isinstance(decimation, int) or decimation < 1:
            raise CommandError("decimation must be a positive integer")
        self.id = session_id
        self.speed = float(speed)
        self.decimation = decimation
        self.buffer = buffer
        self.engine = MissionEngine(scenario)
        self._script = {k: list(cmds) for k, cmds in (script or {}).items()}
        self._pending: queue.SimpleQueue = queue.SimpleQueue()
        self._subscribers: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._status = "paused" if paused else "running"
        self._error: str | None = None
        self._latest = self.engine.current_frame()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True)

    def start(self) -> "Session":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5.0)

    def join(self, timeout: float | None = None) -> None:
        self._thread.join(timeout=timeout)

    @property
    def status(self) -> str:
        with self._lock:
            return self._status

    @property
    def latest(self) -> TelemetryFrame:
        with self._lock:
            return self._latest

    def describe(self) -> dict:
        frame = self.latest
        with self._lock:
            error = self._error
        doc = {
            "id": self.id,
            "status": self.status,
            "scenario": self.engine.scenario.name,
            "speed": self.speed,
            "step": frame.step,
            "t": frame.t,
        }
        if error is not None:
            doc["error"] = error
        return doc

    # ---- command ingress (HTTP handler threads) ----

    def submit(self, action: str, args: dict) -> dict:
        if self.status == "finished":
            raise BusyError("session finished")
        pending = _Pending(action, dict(args or {}))
        self._pending.put(pending)
        if not pending.done.wait(COMMAND_TIMEOUT):
            raise CommandError("command was not applied in time")
        if pending.error is not None:
            raise pending.error
        return {
            "status": "accepted",
            "acked_at_step": pending.step - 1,
            "applied_at_step": pending.step,
        }

    def subscribe(self) -> _Subscriber:
        sub = _Subscriber(self.buffer)
        with self._lock:
            if self._status == "finished":
                sub.q.put(_CLOSE)
            else:
                self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    # ---- control loop (owns engine state) ----

    def _loop(self) -> None:
        try:
            period = self.engine.scenario.controller.T / self.speed
            deadline = time.monotonic() + period
            while not self._stop.is_set() and not self.engine.finished:
                for action, args in self._script.pop(self.engine.step_index, []):
                    self._apply(action, args)
                self._drain_commands()
                if self.status == "paused":
                    time.sleep(min(period, 0.02))
                    deadline = time.monotonic() + period
                    continue
                frame = self.engine.advance()
                with self._lock:
                    self._latest = frame
                if frame.step % self.decimation == 0:
                    self._publish(frame)
                delay = deadline - time.monotonic()
                if delay > 0:
                    self._stop.wait(delay)
                deadline += period
        except Exception as exc:
            with self._lock:
                self._error = str(exc)
        finally:
            with self._lock:
                self._status = "finished"
                subs = list(self._subscribers)
                self._subscribers.clear()
            for sub in subs:
                sub.q.put(_CLOSE)
            self._drain_commands(finished=True)

    def _drain_commands(self, finished: bool = False) -> None:
        while True:
            try:
                pending = self._pending.get_nowait()
            except queue.Empty:
                return
            try:
                if finished:
                    raise BusyError("session finished")
                pending.step = self._apply(pending.action, pending.args)
            except Exception as exc:
                pending.error = exc
            pending.done.set()

    def _apply(self, action: str, args: dict) -> int:
        engine = self.engine
        if action == "fire_pulse":
            peak = _require_number(args, "peak")
            rate = _require_number(args, "rate")
            hold = _require_number(args, "hold")
            if peak <= 0 or rate <= 0 or hold < 0:
                raise CommandError("fire_pulse needs peak > 0, rate > 0, hold >= 0")
            if engine.loads.pulse_busy(engine.t):
                raise BusyError("pulse train active")
            engine.apply_event(
                MissionEvent(
                    t=engine.t,
                    action="fire_pulse_train",
                    args={"count": 1, "period": 1.0, "peak": peak, "rate": rate, "hold": hold},
                )
            )
        elif action == "set_propulsion":
            target = _require_number(args, "target")
            rate = _require_number(args, "rate")
            if target < 0 or rate <= 0:
                raise CommandError("set_propulsion needs target >= 0, rate > 0")
            engine.apply_event(
                MissionEvent(t=engine.t, action=action, args={"target": target, "rate": rate})
            )
        elif action == "set_soc_ref":
            e_ref = _require_number(args, "e_ref")
            capacity = engine.scenario.storage.e_capacity
            if not 0.0 <= e_ref <= capacity:
                raise CommandError(f"e_ref must lie in [0, {capacity:g}]")
            engine.apply_event(MissionEvent(t=engine.t, action=action, args={"e_ref": e_ref}))
        elif action == "pause":
            with self._lock:
                self._status = "paused"
        elif action == "resume":
            with self._lock:
                self._status = "running"
        else:
            raise CommandError(f"unknown action {action!r}")
        return engine.step_index + 1

    def _publish(self, frame: TelemetryFrame) -> None:
        line = json.dumps(frame.json_dict(), separators=(",", ":")) + "\n"
        with self._lock:
            for sub in list(self._subscribers):
                try:
                    sub.q.put_nowait(line)
                except queue.Full:
                    # slow consumer: drop it rather than stall the loop
                    try:
                        sub.q.get_nowait()
                    except queue.Empty:
                        pass
                    sub.q.put_nowait(_OVERFLOW)
                    self._subscribers.remove(sub)


class ServiceState:
    """Registry of live sessions."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._next = 1

    def create(
        self,
        scenario: Scenario,
        speed: float = 1.0,
        decimation: int = 1,
        buffer: int = SUBSCRIBER_BUFFER,
        paused: bool = False,
    ) -> Session:
        with self._lock:
            session_id = f"s{self._next}"
            self._next += 1
            session = Session(
                session_id, scenario, speed, decimation, buffer, paused=paused
            ).start()
            self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSessionError(session_id) from None

    def describe_all(self) -> list[dict]:
        with self._lock:
            sessions = list(self._sessions.values())
        return [s.describe() for s in sessions]

    def stop_all(self) -> None:
        with self._lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            session.stop()


_CMD_PATH = re.compile(r"^/sessions/([^/]+)/command$")
_STATE_PATH = re.compile(r"^/sessions/([^/]+)/state$")
_TELEMETRY_PATH = re.compile(r"^/sessions/([^/]+)/telemetry$")


class ServiceHandler(BaseHTTPRequestHandler):
    server: "ServiceServer"

    def log_message(self, format: str, *args) -> None:
        pass

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, code: int, payload: dict | list) -> None:
        body = json.dumps(payload).encode()
        self.send_response(code)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CommandError(f"malformed JSON body: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise CommandError("request body must be a JSON object")
        return doc

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_POST(self) -> None:
        try:
            if self.path == "/sessions":
                self._create_session()
                return
            match = _CMD_PATH.match(self.path)
            if match:
                self._post_command(match.group(1))
                return
            self._send_json(404, {"error": "not found"})
        except UnknownSessionError:
            self._send_json(404, {"error": "unknown session"})
        except BusyError as exc:
            self._send_json(409, {"error": "busy", "detail": str(exc)})
        except (CommandError, ScenarioError) as exc:
            self._send_json(400, {"error": "invalid", "detail": str(exc)})

    def _create_session(self) -> None:
        doc = self._read_json()
        scenario_doc = doc.get("scenario")
        if scenario_doc is None:
            scenario = default_scenario()
        elif isinstance(scenario_doc, dict):
            scenario = parse_scenario(json.dumps(scenario_doc))
        else:
            raise CommandError("scenario must be an object or null")
        speed = doc.get("speed", 1.0)
        if isinstance(speed, bool) or not isinstance(speed, (int, float)) or speed <= 0:
            raise CommandError("speed must be a number > 0")
        decimation = doc.get("decimation", 1)
        if isinstance(decimation, bool) or not isinstance(decimation, int) or decimation < 1:
            raise CommandError("decimation must be a positive integer")
        paused = doc.get("paused", False)
        if not isinstance(paused, bool):
            raise CommandError("paused must be a boolean")
        session = self.server.state.create(scenario, float(speed), decimation, paused=paused)
        self._send_json(201, session.describe())

    def _post_command(self, session_id: str) -> None:
        session = self.server.state.get(session_id)
        doc = self._read_json()
        action = doc.get("action")
        if not isinstance(action, str):
            raise CommandError("action must be a string")
        args = doc.get("args", {})
        if not isinstance(args, dict):
            raise CommandError("args must be an object")
        self._send_json(200, session.submit(action, args))

    def do_GET(self) -> None:
        try:
            if self.path == "/sessions":
                self._send_json(200, self.server.state.describe_all())
                return
            match = _STATE_PATH.match(self.path)
            if match:
                session = self.server.state.get(match.group(1))
                payload = session.describe()
                payload["frame"] = session.latest.json_dict()
                self._send_json(200, payload)
                return
            match = _TELEMETRY_PATH.match(self.path)
            if match:
                self._stream_telemetry(self.server.state.get(match.group(1)))
                return
            self._send_json(404, {"error": "not found"})
        except UnknownSessionError:
            self._send_json(404, {"error": "unknown session"})

    def _stream_telemetry(self, session: Session) -> None:
        sub = session.subscribe()
        try:
            self.send_response(200)
            self._cors()
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Cache-Control", "no-store")
            self.end_headers()
            while True:
                try:
                    item = sub.q.get(timeout=1.0)
                except queue.Empty:
                    if session.status == "finished":
                        break
                    continue
                if item is _CLOSE:
                    break
                if item is _OVERFLOW:
                    self.wfile.write(b'{"error":"overflow","disconnected":true}\n')
                    break
                self.wfile.write(item.encode())
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            session.unsubscribe(sub)


class ServiceServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], state: ServiceState | None = None):
        super().__init__(address, ServiceHandler)
        self.state = state if state is not None else ServiceState()


def serve(scenario: Scenario, host: str = "127.0.0.1", port: int = 8787, speed: float = 1.0):
    """Start one session for the scenario and serve the API until killed."""
    server = ServiceServer((host, port))
    session = server.state.create(scenario, speed)
    # flush so the port announcement reaches pipes before serve_forever blocks
    print(f"session {session.id} on http://{host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.state.stop_all()
        server.server_close()
