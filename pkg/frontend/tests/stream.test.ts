// Stream client unit tests with a scripted fake socket: jog suppression
// when centered, single zero frame on release, safety zeroing and stale
// marking on disconnect.

import { describe, expect, it } from "vitest";
import { CellStream } from "../src/stream.js";

class FakeSocket {
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  send(data: string) {
    this.sent.push(data);
  }

  close() {
    this.onclose?.();
  }

  open() {
    this.onopen?.();
  }

  deliver(frame: unknown) {
    this.onmessage?.({ data: JSON.stringify(frame) });
  }
}

function makeStream(nowRef: { t: number }) {
  const socket = new FakeSocket();
  const stream = new CellStream("ws://fake/v1/stream", {
    jogHz: 1e-6, // interval effectively never fires; tests pump by hand
    staleMs: 1000,
    webSocketFactory: () => socket as unknown as WebSocket,
    now: () => nowRef.t,
  });
  stream.connect();
  socket.open();
  return { stream, socket };
}

const jogFrames = (socket: FakeSocket) =>
  socket.sent.map((s) => JSON.parse(s)).filter((f) => f.t === "jog");

describe("CellStream jog channel", () => {
  it("emits nothing while sticks are centered", () => {
    const { stream, socket } = makeStream({ t: 0 });
    stream.setJog("r1", [0, 0, 0], [0, 0, 0]);
    for (let i = 0; i < 10; i++) stream.pumpJog();
    expect(jogFrames(socket)).toHaveLength(0);
    stream.close();
  });

  it("streams deflection, then exactly one zero frame on release", () => {
    const { stream, socket } = makeStream({ t: 0 });
    stream.setJog("r1", [0.5, 0, 0], [0, 0, 0]);
    stream.pumpJog();
    stream.pumpJog();
    stream.setJog("r1", [0, 0, 0], [0, 0, 0]); // release
    for (let i = 0; i < 5; i++) stream.pumpJog();
    const frames = jogFrames(socket);
    expect(frames).toHaveLength(3);
    expect(frames[0].lin).toEqual([0.5, 0, 0]);
    expect(frames[2].lin).toEqual([0, 0, 0]);
    expect(frames[2].ang).toEqual([0, 0, 0]);
    stream.close();
  });

  it("forces jog to zero on disconnect and stops sending", () => {
    const { stream, socket } = makeStream({ t: 0 });
    stream.setJog("r1", [0.8, 0, 0], [0, 0, 0]);
    stream.pumpJog();
    expect(jogFrames(socket)).toHaveLength(1);
    socket.close(); // connection drops mid-deflection
    const before = socket.sent.length;
    for (let i = 0; i < 5; i++) stream.pumpJog();
    expect(socket.sent.length).toBe(before); // nothing leaks after the drop
    expect(stream.connected).toBe(false);
  });

  it("reports connection transitions to listeners", () => {
    const nowRef = { t: 0 };
    const transitions: boolean[] = [];
    const socket = new FakeSocket();
    const stream = new CellStream("ws://fake", {
      jogHz: 1e-6,
      webSocketFactory: () => socket as unknown as WebSocket,
      now: () => nowRef.t,
    });
    stream.onConnection((up) => transitions.push(up));
    stream.connect();
    socket.open();
    socket.close();
    expect(transitions).toEqual([true, false]);
  });
});

describe("CellStream staleness", () => {
  it("marks the mirror stale after staleMs of silence", () => {
    const nowRef = { t: 0 };
    const { stream, socket } = makeStream(nowRef);
    socket.deliver({ t: "evt", seq: 1, sim_time: 0, source: "x", kind: "ONLINE", payload: {} });
    expect(stream.isStale()).toBe(false);
    nowRef.t = 900;
    expect(stream.isStale()).toBe(false);
    nowRef.t = 1100;
    expect(stream.isStale()).toBe(true);
    socket.deliver({ t: "evt", seq: 2, sim_time: 1, source: "x", kind: "ONLINE", payload: {} });
    expect(stream.isStale()).toBe(false);
    stream.close();
    expect(stream.isStale()).toBe(true);
  });

  it("tracks per-robot state from robot_state frames", () => {
    const { stream, socket } = makeStream({ t: 0 });
    socket.deliver({
      t: "robot_state", seq: 3, sim_time: 0.1, source: "m0001", kind: "ROBOT_STATE",
      payload: { joints: [0, 0, 0], mode: "IDLE", tcp: { p: [0.1, 0.2, 0.3], q: [1, 0, 0, 0] }, tool: null, model: "desk6" },
    });
    expect(stream.robotStates.get("m0001")?.tcp.p).toEqual([0.1, 0.2, 0.3]);
    stream.close();
  });
});
