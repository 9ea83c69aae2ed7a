"""Operations boundary: HTTP command/query API plus a bidirectional live
channel (events and robot state downstream, jog/drag upstream).

The gateway holds no domain state: every mutation delegates to the cell's
subsystems under the cell lock, so killing and restarting the gateway loses
nothing. Jog frames are latest-wins and are zeroed when a stream client
disconnects (staleness beats lag for teleoperation).
"""

from __future__ import annotations

import asyncio
import json
import threading
import time

from dataclasses import dataclass

from fastapi import FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from .assembler import render, validate
from .cell import Cell
from .errors import CellError, InvalidValue, ValidationFailed
from .model import EventKind, Pose
from .skills import SkillKind


@dataclass(frozen=True)
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8333
    static_path: str | None = None
    event_buffer: int = 1024  # max events per stream poll batch
    cmd_timeout: float = 30.0  # wall seconds a blocking cmd may run

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise InvalidValue(f"invalid port {self.port}")
        if self.event_buffer < 64:
            raise InvalidValue("event buffer must be >= 64")

# error code -> HTTP status; anything unlisted is a 400
_NOT_FOUND = {"unknown_module", "unknown_skill", "unknown_version", "unknown_run",
              "unknown_sequence", "unknown_session", "unknown_tool"}
_CONFLICT = {"name_conflict", "busy_mode", "already_recording", "skill_in_use",
             "robot_busy", "slot_occupied", "slot_empty", "already_released",
             "already_engaged", "tool_already_equipped", "no_tool_equipped",
             "validation_failed", "module_offline", "brake_engaged"}


def _status_for(exc: CellError) -> int:
    if exc.code in _NOT_FOUND:
        return 404
    if exc.code in _CONFLICT:
        return 409
    return 400


def create_app(cell: Cell, static_path: str | None = None,
               cmd_timeout: float = 30.0,
               config: GatewayConfig | None = None) -> FastAPI:
    config = config or GatewayConfig(static_path=static_path, cmd_timeout=cmd_timeout)
    static_path = config.static_path
    cmd_timeout = config.cmd_timeout
    app = FastAPI(title="reconcell gateway", version="1")

    @app.exception_handler(CellError)
    async def _cell_error(_req, exc: CellError):
        body = {"error": exc.code, "detail": exc.detail}
        if isinstance(exc, ValidationFailed):
            body["findings"] = exc.findings
        return JSONResponse(body, status_code=_status_for(exc))

    # -- cell & modules ------------------------------------------------------

    @app.get("/v1/cell")
    def get_cell():
        with cell.lock:
            return cell.registry.snapshot().to_doc()

    @app.get("/v1/modules/{module_id}")
    def get_module(module_id: str):
        with cell.lock:
            return cell.registry.record(module_id).to_doc()

    @app.post("/v1/modules/{module_id}/cmd")
    async def module_cmd(module_id: str, body: dict):
        verb = body.get("verb")
        if not isinstance(verb, str):
            return JSONResponse({"error": "bad_request", "detail": "verb required"}, 400)
        with cell.lock:
            handle = cell.registry.dispatch(module_id, verb, body.get("params") or {})
        if not handle.done:
            await asyncio.get_event_loop().run_in_executor(None, handle.wait, cmd_timeout)
        if not handle.done:
            return JSONResponse({"error": "timeout",
                                 "detail": f"command still running after {cmd_timeout}s",
                                 "cmd_id": handle.cmd_id}, 504)
        return {"cmd_id": handle.cmd_id, "outcome": handle.outcome, "result": handle.result}

    @app.post("/v1/modules")
    def module_attach(body: dict):
        """Attach a descriptor-only module backed by a stub agent that
        acknowledges its declared verbs (operator/testing affordance)."""
        from .registry import ModuleDescriptor, StubAgent

        desc = ModuleDescriptor.from_doc(body.get("descriptor", body))
        with cell.lock:
            module_id = cell.attach(StubAgent(desc))
        return JSONResponse({"module_id": module_id, "name": desc.name}, 201)

    @app.post("/v1/modules/{module_id}/detach")
    def module_detach(module_id: str):
        with cell.lock:
            cell.detach(module_id)
        return {"detached": module_id}

    # -- events ---------------------------------------------------------------

    @app.get("/v1/events")
    def get_events(from_seq: int = Query(1), limit: int = Query(1000)):
        with cell.lock:
            sub = cell.registry.subscribe(from_seq=from_seq)
            events = sub.poll(limit=limit)
        return {"events": [e.to_doc() for e in events]}

    # -- skills -----------------------------------------------------------------

    @app.get("/v1/skills")
    def list_skills(tag: str | None = None, kind: str | None = None):
        with cell.lock:
            entries = cell.store.list(tag=tag, kind=kind)
        return {"skills": [e.to_doc() for e in entries]}

    @app.get("/v1/skills/{name}")
    def get_skill(name: str, version: int | None = None):
        with cell.lock:
            return cell.store.get(name, version).to_doc()

    @app.get("/v1/skills/{name}/history")
    def skill_history(name: str):
        with cell.lock:
            return {"versions": [e.to_doc() for e in cell.store.history(name)]}

    @app.put("/v1/skills/{name}")
    def put_skill(name: str, body: dict):
        with cell.lock:
            version = cell.store.put(name, SkillKind(body.get("kind", "TRAJECTORY")),
                                     body.get("payload"), body.get("meta"))
        return {"name": name, "version": version}

    @app.delete("/v1/skills/{name}")
    def delete_skill(name: str):
        with cell.lock:
            cell.store.delete(name)
        return {"deleted": name}

    # -- teach ---------------------------------------------------------------------

    @app.post("/v1/teach/record/start")
    def record_start(body: dict):
        robot = body.get("robot", "r1")
        with cell.lock:
            robot_id = cell.registry.module_id_by_name(robot)
            session_id = cell.teach.start_recording(robot_id, float(body.get("rate", 50.0)))
        return {"session_id": session_id}

    @app.post("/v1/teach/record/stop")
    def record_stop(body: dict):
        with cell.lock:
            traj = cell.teach.stop_recording(body["session_id"])
        return {"session_id": body["session_id"], "samples": len(traj.samples),
                "duration": traj.duration, "trajectory": traj.to_doc()}

    @app.post("/v1/teach/save")
    def teach_save(body: dict):
        with cell.lock:
            version = cell.teach.save_demonstration(body["session_id"], body["name"])
        return {"name": body["name"], "version": version}

    @app.post("/v1/teach/tape")
    def teach_tape(body: dict):
        """Run a scripted jog tape deterministically on the sim clock
        (blocks until the tape has fully played)."""
        with cell.lock:
            version = cell.run_tape(body.get("robot", "r1"), body["entries"],
                                    rate=float(body.get("rate", 50.0)),
                                    save_as=body.get("save_as"))
        out = {"played": len(body["entries"])}
        if body.get("save_as"):
            out.update({"name": body["save_as"], "version": version})
        return out

    # -- sequences --------------------------------------------------------------------

    @app.post("/v1/sequences")
    async def compile_sequence(request: Request):
        if request.headers.get("content-type", "").startswith("application/json"):
            body = await request.json()
            text, args = body.get("text", ""), body.get("args")
        else:
            text, args = (await request.body()).decode(), None
        with cell.lock:
            ir = cell.compile_sequence(text, args)
        return {"name": ir.name, "states": len(ir.states), "entry": ir.entry,
                "source_hash": ir.source_hash}

    @app.get("/v1/sequences")
    def list_sequences():
        with cell.lock:
            return {"sequences": cell.library.names()}

    @app.get("/v1/sequences/{name}/listing")
    def sequence_listing(name: str):
        with cell.lock:
            return PlainTextResponse(render(cell.library.get(name), "listing"))

    @app.get("/v1/sequences/{name}/dot")
    def sequence_dot(name: str):
        with cell.lock:
            return PlainTextResponse(render(cell.library.get(name), "dot"))

    @app.get("/v1/sequences/{name}/ir")
    def sequence_ir(name: str):
        with cell.lock:
            return cell.library.get(name).to_doc()

    @app.post("/v1/sequences/{name}/validate")
    def sequence_validate(name: str):
        with cell.lock:
            findings = validate(cell.library.get(name), cell.registry.snapshot(), cell.store)
        return {"findings": [f.to_doc() for f in findings],
                "runnable": not any(f.severity == "error" for f in findings)}

    @app.post("/v1/sequences/{name}/run")
    def sequence_run(name: str):
        with cell.lock:
            report = cell.start_run(name)  # raises ValidationFailed -> 409
        return JSONResponse({"run_id": report.run_id, "sequence": name}, 202)

    @app.get("/v1/runs")
    def list_runs():
        with cell.lock:
            return {"runs": [r.to_doc() for r in cell.executor.reports()]}

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        with cell.lock:
            return cell.executor.report(run_id).to_doc()

    # -- live channel --------------------------------------------------------------------

    @app.websocket("/v1/stream")
    async def stream(ws: WebSocket, from_seq: int | None = None):
        await ws.accept()
        with cell.lock:
            sub = cell.registry.subscribe(from_seq=from_seq)
        jogged: set[str] = set()
        stop = asyncio.Event()

        async def pump_events():
            while not stop.is_set():
                with cell.lock:
                    events = sub.poll(limit=config.event_buffer)
                for ev in events:
                    frame = ev.to_doc()
                    frame["t"] = "robot_state" if ev.kind is EventKind.ROBOT_STATE else "evt"
                    await ws.send_text(json.dumps(frame))
                await asyncio.sleep(0.02)

        async def pump_input():
            while True:
                msg = await ws.receive_text()
                try:
                    doc = json.loads(msg)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"t": "err", "error": "bad_frame"}))
                    continue
                kind = doc.get("t")
                try:
                    if kind == "jog":
                        robot = doc.get("robot", "r1")
                        with cell.lock:
                            robot_id = cell.registry.module_id_by_name(robot)
                            cell.teach.jog_doc(robot_id, {"lin": doc["lin"], "ang": doc["ang"]})
                        jogged.add(robot)
                    elif kind == "drag":
                        with cell.lock:
                            agent = cell.robot(doc.get("robot", "r1"))
                            agent.apply_drag(Pose.from_doc(doc["delta"]))
                    else:
                        await ws.send_text(json.dumps({"t": "err", "error": "unknown_frame"}))
                except CellError as exc:
                    await ws.send_text(json.dumps({"t": "err", "error": exc.code,
                                                   "detail": exc.detail}))
                except (KeyError, TypeError, ValueError):
                    await ws.send_text(json.dumps({"t": "err", "error": "bad_frame"}))

        sender = asyncio.ensure_future(pump_events())
        try:
            await pump_input()
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            sender.cancel()
            # safety: a vanished client must not leave a robot drifting
            with cell.lock:
                for robot in jogged:
                    try:
                        cell.teach.zero_jog(cell.registry.module_id_by_name(robot))
                    except CellError:
                        pass

    if static_path:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_path, html=True), name="pendant")

    return app


class CellRunner:
    """Background thread advancing the simulation under the cell lock.

    ``realtime=True`` paces sim time to wall time; otherwise the cell runs
    as fast as the host allows (headless demos, CI).
    """

    def __init__(self, cell: Cell, realtime: bool = True):
        self.cell = cell
        self.realtime = realtime
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True)

    def start(self) -> "CellRunner":
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5)

    def _loop(self):
        dt = self.cell.clock.dt
        next_wall = time.monotonic()
        while not self._stop.is_set():
            with self.cell.lock:
                self.cell.step()
            if self.realtime:
                next_wall += dt
                delay = next_wall - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_wall = time.monotonic()  # fell behind; don't spiral
            else:
                time.sleep(0)  # yield so request handlers can take the lock


def serve(cell: Cell, host: str = "127.0.0.1", port: int = 8333,
          static_path: str | None = None, realtime: bool = True,
          config: GatewayConfig | None = None):
    """Blocking entry point: runner thread + uvicorn server."""
    import uvicorn

    config = config or GatewayConfig(host=host, port=port, static_path=static_path)
    app = create_app(cell, config=config)
    runner = CellRunner(cell, realtime=realtime).start()
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    finally:
        runner.stop()
