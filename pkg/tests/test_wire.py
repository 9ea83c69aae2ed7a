"""Wire protocol tests: framing codec and a full agent session over TCP."""

import socket
import threading
import time

import pytest

from reconcell.clock import SimClock
from reconcell.registry import Capability, CellRegistry, ModuleDescriptor, ModuleKind, SUCCEEDED
from reconcell.wire import MAX_FRAME, AgentClient, BusServer, FrameError, FrameReader, encode_frame


def descriptor(name="remote_fixture"):
    return ModuleDescriptor(name, ModuleKind.FIXTURE, (Capability("clamp"), Capability("unclamp")))


@pytest.fixture
def server():
    clock = SimClock(0.01)
    reg = CellRegistry(clock)
    lock = threading.RLock()
    srv = BusServer(reg, lock, port=0).start()
    yield srv, reg, clock, lock
    srv.stop()


def wait_for(pred, timeout=5.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        if pred():
            return True
        time.sleep(0.005)
    return False


class TestFraming:
    def test_encode_rejects_oversize(self):
        with pytest.raises(FrameError):
            encode_frame({"t": "CMD", "params": {"blob": "x" * MAX_FRAME}})

    def test_reader_round_trip_and_resync(self):
        a, b = socket.socketpair()
        reader = FrameReader(b)
        a.sendall(encode_frame({"t": "HB", "seq": 1}))
        a.sendall(b"not json\n")
        a.sendall(b"x" * (MAX_FRAME + 10) + b"\n")
        a.sendall(encode_frame({"t": "HB", "seq": 2}))
        a.close()
        assert reader.read_frame() == {"t": "HB", "seq": 1}
        with pytest.raises(FrameError):
            reader.read_frame()
        with pytest.raises(FrameError):
            reader.read_frame()
        assert reader.read_frame() == {"t": "HB", "seq": 2}
        assert reader.read_frame() is None


class TestSession:
    def test_hello_welcome_heartbeat_cmd_res(self, server):
        srv, reg, clock, lock = server
        client = AgentClient(*srv.address)
        mid = client.hello(descriptor())
        assert mid.startswith("m")
        client.heartbeat()
        assert wait_for(lambda: reg.record(mid).state.value == "ONLINE")

        # dispatch travels as a CMD frame; RES resolves the handle
        with lock:
            cmd = reg.dispatch(mid, "clamp", {})
        frame = client.expect({"CMD"})
        assert frame["verb"] == "clamp" and frame["id"] == cmd.cmd_id
        client.respond(frame["id"], SUCCEEDED, {"ok": True})
        assert cmd.wait(timeout=5)
        assert cmd.outcome == SUCCEEDED and cmd.result == {"ok": True}
        client.bye()
        assert wait_for(lambda: len(reg.snapshot().modules) == 0)

    def test_unknown_frame_type_gets_err(self, server):
        srv, _, _, _ = server
        client = AgentClient(*srv.address)
        client.hello(descriptor("f2"))
        client.send({"t": "NOPE"})
        frame = client.expect({"ERR"})
        assert frame["error"] == "unknown_frame"
        client.close()

    def test_name_conflict_reported(self, server):
        srv, _, _, _ = server
        c1 = AgentClient(*srv.address)
        c1.hello(descriptor("dup"))
        c2 = AgentClient(*srv.address)
        from reconcell.errors import InvalidDescriptor

        with pytest.raises(InvalidDescriptor) as err:
            c2.hello(descriptor("dup"))
        assert "name_conflict" in str(err.value)
        c1.close()
        c2.close()

    def test_disconnect_detaches(self, server):
        srv, reg, _, _ = server
        client = AgentClient(*srv.address)
        client.hello(descriptor("vanish"))
        assert len(reg.snapshot().modules) == 1
        client.close()
        assert wait_for(lambda: len(reg.snapshot().modules) == 0)

    def test_events_streamed_to_agent(self, server):
        srv, reg, _, lock = server
        client = AgentClient(*srv.address)
        mid = client.hello(descriptor("watcher"))
        client.heartbeat()
        frame = client.expect({"EVT", "EVT"}, skip_events=False)
        # first streamed event after HELLO is this module's ONLINE transition
        assert frame["t"] == "EVT"
        assert frame["kind"] == "ONLINE" and frame["payload"]["module_id"] == mid
        client.close()

    def test_stale_heartbeat_err(self, server):
        srv, _, _, _ = server
        client = AgentClient(*srv.address)
        client.hello(descriptor("hb"))
        client.send({"t": "HB", "seq": 1})
        client.send({"t": "HB", "seq": 1})
        frame = client.expect({"ERR"})
        assert frame["error"] == "stale_sequence"
        client.close()
