/** Live channel client: events and robot state downstream, jog/drag
 * upstream over one WebSocket.
 *
 * Jog frames are rate-limited (default 30 Hz) and suppressed while the
 * sticks are centered: releasing the sticks emits exactly one all-zeros
 * frame, then nothing. On disconnect the desired jog is forced to zero so
 * a reconnect can never resume stale motion, and the mirror is marked
 * stale after `staleMs` without any frame.
 */

export interface StreamFrame {
  t: "evt" | "robot_state";
  seq: number;
  sim_time: number;
  source: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface RobotStateDoc {
  joints: number[];
  mode: string;
  tcp: { p: [number, number, number]; q: [number, number, number, number] };
  tool: { tool_id: string } | null;
  model: string;
}

export type Vec3 = [number, number, number];

const ZERO: Vec3 = [0, 0, 0];

function isZero(v: Vec3): boolean {
  return v[0] === 0 && v[1] === 0 && v[2] === 0;
}

export interface StreamOptions {
  jogHz?: number;
  staleMs?: number;
  /** injectable for tests; defaults to the global WebSocket */
  webSocketFactory?: (url: string) => WebSocket;
  /** injectable clock for tests */
  now?: () => number;
}

export class CellStream {
  readonly jogPeriodMs: number;
  readonly staleMs: number;

  connected = false;
  lastFrameAt = 0;
  robotStates = new Map<string, RobotStateDoc>();
  /** jog frames actually written to the socket (monitorable by tests) */
  sentJogFrames: { robot: string; lin: Vec3; ang: Vec3 }[] = [];

  private ws: WebSocket | null = null;
  private desired = new Map<string, { lin: Vec3; ang: Vec3 }>();
  private zeroSent = new Map<string, boolean>();
  private jogTimer: ReturnType<typeof setInterval> | null = null;
  private eventListeners: ((f: StreamFrame) => void)[] = [];
  private connectionListeners: ((up: boolean) => void)[] = [];
  private makeSocket: (url: string) => WebSocket;
  private now: () => number;

  constructor(
    public url: string,
    opts: StreamOptions = {},
  ) {
    this.jogPeriodMs = 1000 / (opts.jogHz ?? 30);
    this.staleMs = opts.staleMs ?? 1000;
    this.makeSocket = opts.webSocketFactory ?? ((u) => new WebSocket(u));
    this.now = opts.now ?? (() => Date.now());
  }

  connect(): void {
    const ws = this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.connected = true;
      this.lastFrameAt = this.now();
      this.connectionListeners.forEach((cb) => cb(true));
    };
    ws.onmessage = (ev: MessageEvent) => {
      this.lastFrameAt = this.now();
      let frame: StreamFrame;
      try {
        frame = JSON.parse(String(ev.data));
      } catch {
        return;
      }
      if (frame.t === "robot_state") {
        this.robotStates.set(frame.source, frame.payload as unknown as RobotStateDoc);
      }
      this.eventListeners.forEach((cb) => cb(frame));
    };
    const down = () => this.handleDisconnect();
    ws.onclose = down;
    ws.onerror = down;
    this.jogTimer = setInterval(() => this.pumpJog(), this.jogPeriodMs);
  }

  close(): void {
    if (this.jogTimer) {
      clearInterval(this.jogTimer);
      this.jogTimer = null;
    }
    this.ws?.close();
    this.handleDisconnect();
  }

  private handleDisconnect(): void {
    if (!this.connected && !this.ws) return;
    this.connected = false;
    this.ws = null;
    // safety: never let a reconnect resume a stale deflection
    for (const robot of this.desired.keys()) {
      this.desired.set(robot, { lin: [...ZERO] as Vec3, ang: [...ZERO] as Vec3 });
      this.zeroSent.set(robot, true);
    }
    if (this.jogTimer) {
      clearInterval(this.jogTimer);
      this.jogTimer = null;
    }
    this.connectionListeners.forEach((cb) => cb(false));
  }

  isStale(): boolean {
    return !this.connected || this.now() - this.lastFrameAt > this.staleMs;
  }

  onEvent(cb: (f: StreamFrame) => void): void {
    this.eventListeners.push(cb);
  }

  onConnection(cb: (up: boolean) => void): void {
    this.connectionListeners.push(cb);
  }

  /** Declare the current stick deflection for a robot (normalized). */
  setJog(robot: string, lin: Vec3, ang: Vec3): void {
    this.desired.set(robot, { lin: [...lin] as Vec3, ang: [...ang] as Vec3 });
    if (!isZero(lin) || !isZero(ang)) {
      this.zeroSent.set(robot, false);
    }
  }

  sendDrag(robot: string, delta: { p: Vec3; q: [number, number, number, number] }): void {
    if (!this.ws || !this.connected) return;
    this.ws.send(JSON.stringify({ t: "drag", robot, delta }));
  }

  /** One jog pump cycle (exposed so tests can drive time by hand). */
  pumpJog(): void {
    if (!this.ws || !this.connected) return;
    for (const [robot, stick] of this.desired) {
      const centered = isZero(stick.lin) && isZero(stick.ang);
      if (centered && (this.zeroSent.get(robot) ?? true)) {
        continue; // centered steady-state (or never deflected): no frames
      }
      const frame = { t: "jog", robot, lin: stick.lin, ang: stick.ang };
      this.ws.send(JSON.stringify(frame));
      this.sentJogFrames.push({ robot, lin: [...stick.lin] as Vec3, ang: [...stick.ang] as Vec3 });
      if (centered) {
        this.zeroSent.set(robot, true);
      }
    }
  }
}
