"""Stream transport for module agents: newline-delimited JSON frames.

Frame types (direction agent <-> registry):

    {"t": "HELLO", "descriptor": {...}}        agent -> registry
    {"t": "WELCOME", "module_id": "..."}       registry -> agent
    {"t": "HB", "seq": n}                      agent -> registry
    {"t": "CMD", "id": k, "verb": v, "params": {}}   registry -> agent
    {"t": "RES", "id": k, "outcome": o, "result": {}} agent -> registry
    {"t": "EVT", ...event fields...}           registry -> agent
    {"t": "BYE"}                               either direction
    {"t": "ERR", "error": code, "detail": txt} registry -> agent

Frames larger than 64 KiB are rejected; an unknown "t" draws an ERR and the
frame is ignored. In-process agents bypass this module entirely; the bridge
exists so external processes can join the cell behind the same
:class:`reconcell.registry.Agent` seam.
"""

from __future__ import annotations

import json
import socket
import threading

from .errors import CellError, InvalidDescriptor
from .registry import Agent, CellRegistry, CommandHandle, ModuleDescriptor

MAX_FRAME = 64 * 1024


class FrameError(CellError):
    code = "frame_error"


def encode_frame(doc: dict) -> bytes:
    data = json.dumps(doc, separators=(",", ":")).encode() + b"\n"
    if len(data) > MAX_FRAME:
        raise FrameError(f"frame of {len(data)} bytes exceeds {MAX_FRAME}")
    return data


class FrameReader:
    """Buffered NDJSON reader with the 64 KiB frame cap.

    Oversized lines are discarded up to the next newline and reported as a
    FrameError so the stream can resynchronize.
    """

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    def read_frame(self) -> dict | None:
        """Next frame, or None on EOF. Raises FrameError on oversize/bad JSON."""
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line = self._buf[:nl]
                self._buf = self._buf[nl + 1:]
                if len(line) + 1 > MAX_FRAME:
                    raise FrameError("oversized frame dropped")
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FrameError(f"bad JSON frame: {exc}") from exc
                if not isinstance(doc, dict):
                    raise FrameError("frame must be a JSON object")
                return doc
            if len(self._buf) > MAX_FRAME:
                # swallow until newline, then report
                if not self._drain_oversize():
                    return None
                raise FrameError("oversized frame dropped")
            chunk = self._sock.recv(65536)
            if not chunk:
                return None
            self._buf += chunk

    def _drain_oversize(self) -> bool:
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                self._buf = self._buf[nl + 1:]
                return True
            self._buf = b""
            chunk = self._sock.recv(65536)
            if not chunk:
                return False
            self._buf += chunk


class RemoteAgent(Agent):
    """Registry-side proxy: forwards commands to a connected agent process."""

    def __init__(self, descriptor: ModuleDescriptor, conn: "_Connection"):
        self._descriptor = descriptor
        self._conn = conn
        self.pending: dict[int, CommandHandle] = {}

    def descriptor(self) -> ModuleDescriptor:
        return self._descriptor

    def begin(self, cmd: CommandHandle):
        self.pending[cmd.cmd_id] = cmd
        self._conn.send({"t": "CMD", "id": cmd.cmd_id, "verb": cmd.verb, "params": cmd.params})

    def on_abort(self, cmd: CommandHandle):
        self.pending.pop(cmd.cmd_id, None)

    def resolve(self, cmd_id: int, outcome: str, result: dict):
        cmd = self.pending.pop(cmd_id, None)
        if cmd is not None:
            cmd.finish(outcome, result)


class _Connection:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.reader = FrameReader(sock)
        self._wlock = threading.Lock()
        self.closed = False

    def send(self, doc: dict):
        try:
            data = encode_frame(doc)
            with self._wlock:
                self.sock.sendall(data)
        except (OSError, FrameError):
            self.closed = True

    def close(self):
        self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class BusServer:
    """TCP bridge: each connection is one module agent speaking the frame
    protocol. All registry access happens under the shared cell lock."""

    def __init__(self, registry: CellRegistry, lock: threading.RLock, host="127.0.0.1", port=0):
        self.registry = registry
        self.lock = lock
        self._srv = socket.create_server((host, port))
        self.address = self._srv.getsockname()
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)

    def start(self) -> "BusServer":
        self._accept_thread.start()
        return self

    def stop(self):
        self._stop.set()
        try:
            self._srv.close()
        except OSError:
            pass

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, _ = self._srv.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve, args=(_Connection(sock),), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve(self, conn: _Connection):
        module_id = None
        agent = None
        pump = None
        try:
            while not self._stop.is_set():
                try:
                    frame = conn.reader.read_frame()
                except FrameError as exc:
                    conn.send({"t": "ERR", "error": exc.code, "detail": exc.detail})
                    continue
                if frame is None:
                    break
                t = frame.get("t")
                if t == "HELLO":
                    if module_id is not None:
                        conn.send({"t": "ERR", "error": "protocol", "detail": "already attached"})
                        continue
                    try:
                        desc = ModuleDescriptor.from_doc(frame.get("descriptor", {}))
                        agent = RemoteAgent(desc, conn)
                        with self.lock:
                            module_id = self.registry.attach(desc, agent)
                    except CellError as exc:
                        conn.send({"t": "ERR", "error": exc.code, "detail": exc.detail})
                        continue
                    conn.send({"t": "WELCOME", "module_id": module_id})
                    pump = threading.Thread(target=self._event_pump, args=(conn,), daemon=True)
                    pump.start()
                elif t == "HB":
                    if module_id is None:
                        conn.send({"t": "ERR", "error": "protocol", "detail": "HELLO first"})
                        continue
                    try:
                        with self.lock:
                            self.registry.heartbeat(module_id, int(frame.get("seq", 0)))
                    except (CellError, ValueError, TypeError) as exc:
                        code = exc.code if isinstance(exc, CellError) else "bad_frame"
                        conn.send({"t": "ERR", "error": code, "detail": str(exc)})
                elif t == "RES":
                    if agent is None:
                        conn.send({"t": "ERR", "error": "protocol", "detail": "HELLO first"})
                        continue
                    with self.lock:
                        agent.resolve(int(frame.get("id", -1)),
                                      str(frame.get("outcome", "FAILED")),
                                      frame.get("result") or {})
                elif t == "BYE":
                    break
                else:
                    conn.send({"t": "ERR", "error": "unknown_frame", "detail": f"unknown t {t!r}"})
        finally:
            if module_id is not None:
                with self.lock:
                    try:
                        self.registry.detach(module_id)
                    except CellError:
                        pass  # already detached
            conn.close()

    def _event_pump(self, conn: _Connection):
        with self.lock:
            sub = self.registry.subscribe()
        while not self._stop.is_set() and not conn.closed:
            with self.lock:
                events = sub.poll(limit=64)
            if not events:
                self._stop.wait(0.01)
                continue
            for ev in events:
                conn.send({"t": "EVT", **ev.to_doc()})


class AgentClient:
    """Client-side helper for module agent processes (and tests)."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.reader = FrameReader(self.sock)
        self.module_id = None
        self._hb_seq = 0

    def hello(self, descriptor: ModuleDescriptor) -> str:
        self.send({"t": "HELLO", "descriptor": descriptor.to_doc()})
        frame = self.expect({"WELCOME", "ERR"})
        if frame["t"] == "ERR":
            raise InvalidDescriptor(f"{frame.get('error')}: {frame.get('detail')}")
        self.module_id = frame["module_id"]
        return self.module_id

    def heartbeat(self):
        self._hb_seq += 1
        self.send({"t": "HB", "seq": self._hb_seq})

    def respond(self, cmd_id: int, outcome: str, result: dict | None = None):
        self.send({"t": "RES", "id": cmd_id, "outcome": outcome, "result": result or {}})

    def bye(self):
        self.send({"t": "BYE"})

    def send(self, doc: dict):
        self.sock.sendall(encode_frame(doc))

    def send_raw(self, data: bytes):
        self.sock.sendall(data)

    def next_frame(self) -> dict | None:
        return self.reader.read_frame()

    def expect(self, kinds: set, skip_events: bool = True) -> dict:
        while True:
            frame = self.next_frame()
            if frame is None:
                raise FrameError("connection closed")
            if skip_events and frame.get("t") == "EVT" and "EVT" not in kinds:
                continue
            if frame.get("t") in kinds:
                return frame

    def close(self):
        self.sock.close()
