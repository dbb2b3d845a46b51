"""WebSocket sandbox around a single simulation thread.

The engine is single-threaded by design, so this module wraps it in a
session thread that drains a command queue before every tick and publishes
each finished tick as an immutable snapshot dict.  Viewers connect to /ws
and get two independent flows: a fixed-rate sender that always ships the
latest snapshot (slow viewers miss frames, they never stall the sim) and a
receiver that validates commands and answers bad ones with an error message
while keeping the connection open.
"""

from __future__ import annotations

import asyncio
import json
import math
import queue
import threading
import time
from contextlib import asynccontextmanager, suppress

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .engine import SimEngine, StageFault
from .scenario import Scenario

QUAT_UNIT_TOL = 1e-3


class CommandError(ValueError):
    """Raised for any wire message the server refuses to enqueue."""


def _vec(msg: dict, key: str, n: int) -> list[float]:
    v = msg.get(key)
    ok = (isinstance(v, (list, tuple)) and len(v) == n
          and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                  and math.isfinite(x) for x in v))
    if not ok:
        raise CommandError(f"{key!r} must be a list of {n} finite numbers")
    return [float(x) for x in v]


class SimSession:
    """Owns a SimEngine on a background thread.

    pace "real" sleeps toward wall-clock tick deadlines and stops trying to
    catch up once it falls half a second behind; "fast" free-runs.  The
    scenario duration is ignored here: a sandbox runs until stopped.
    """

    def __init__(self, scenario: Scenario, pace: str = "real"):
        if pace not in ("real", "fast"):
            raise ValueError("pace must be 'real' or 'fast'")
        self.engine = SimEngine(scenario)
        self.pace = pace
        self.obstacle_ids = frozenset(m.obstacle_id for m in self.engine.movers)
        self.paused = False
        self.fault: str | None = None
        self._commands: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._snapshot: dict | None = None
        self._thread = threading.Thread(target=self._run, name="voxarm-sim",
                                        daemon=True)

    def start(self) -> "SimSession":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=10.0)

    def snapshot(self) -> dict | None:
        # replaced wholesale by the sim thread, never mutated in place
        return self._snapshot

    def submit(self, fn) -> None:
        """Queue fn(session) to run on the sim thread before the next tick."""
        self._commands.put(fn)

    def _drain(self) -> None:
        while True:
            try:
                fn = self._commands.get_nowait()
            except queue.Empty:
                return
            fn(self)

    def _run(self) -> None:
        dt = self.engine.sc.dt
        deadline = time.perf_counter()
        while not self._stop.is_set():
            self._drain()
            if self.paused:
                time.sleep(0.002)
                deadline = time.perf_counter()
                continue
            try:
                self.engine.step()
            except StageFault as exc:
                self.fault = f"{exc.stage}: {exc.detail}"
                return
            self._snapshot = self.engine.snapshot()
            if self.pace == "real":
                deadline += dt
                lag = deadline - time.perf_counter()
                if lag > 0:
                    time.sleep(lag)
                elif lag < -0.5:
                    deadline = time.perf_counter()


def parse_command(raw: str, session: SimSession):
    """Validate one wire message and return the closure to enqueue.

    Raises CommandError with a human-readable detail on any problem; the
    caller turns that into an error reply without touching the simulation.
    """
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CommandError(f"not valid JSON: {exc}") from exc
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise CommandError("message must be an object with a string 'type'")
    kind = msg["type"]

    if kind == "set_obstacle":
        oid = msg.get("id")
        if not isinstance(oid, int) or isinstance(oid, bool):
            raise CommandError("'id' must be an integer")
        if oid not in session.obstacle_ids:
            raise CommandError(f"unknown obstacle id {oid}")
        pos = _vec(msg, "position", 3)
        return lambda s: s.engine.set_obstacle(oid, pos)

    if kind == "set_target":
        pos = _vec(msg, "position", 3)
        quat = _vec(msg, "quaternion", 4)
        norm = math.sqrt(sum(c * c for c in quat))
        if abs(norm - 1.0) > QUAT_UNIT_TOL:
            raise CommandError(
                f"quaternion norm {norm:.6f} is not within "
                f"{QUAT_UNIT_TOL} of 1")
        return lambda s: s.engine.set_target(pos, quat)

    if kind == "pause":
        return lambda s: setattr(s, "paused", True)

    if kind == "resume":
        return lambda s: setattr(s, "paused", False)

    if kind == "toggle_regularization":
        enabled = msg.get("enabled")
        if not isinstance(enabled, bool):
            raise CommandError("'enabled' must be a boolean")
        return lambda s: s.engine.set_regularization(enabled)

    raise CommandError(f"unknown command type {kind!r}")


def create_app(scenario: Scenario, pace: str = "real",
               broadcast_hz: float = 30.0) -> FastAPI:
    if broadcast_hz <= 0:
        raise ValueError("broadcast_hz must be > 0")
    session = SimSession(scenario, pace=pace)
    interval = 1.0 / broadcast_hz

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        session.start()
        try:
            yield
        finally:
            session.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.get("/")
    def info():
        return {"scenario": scenario.name,
                "joints": session.engine.chain.n,
                "spheres": len(session.engine.spheres),
                "obstacles": sorted(session.obstacle_ids),
                "fault": session.fault}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()

        async def sender():
            while True:
                snap = session.snapshot()
                if snap is not None:
                    await ws.send_text(json.dumps(snap))
                await asyncio.sleep(interval)

        pump = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    fn = parse_command(raw, session)
                except CommandError as exc:
                    await ws.send_text(json.dumps(
                        {"type": "error", "detail": str(exc)}))
                    continue
                session.submit(fn)
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            with suppress(asyncio.CancelledError):
                await pump

    return app


def serve(scenario: Scenario, host: str = "127.0.0.1", port: int = 8000,
          pace: str = "real", broadcast_hz: float = 30.0) -> None:
    import uvicorn

    uvicorn.run(create_app(scenario, pace=pace, broadcast_hz=broadcast_hz),
                host=host, port=port, log_level="warning")
