// End-to-end against the real gateway: boots the bundled demo cell in a
// child process, then drives the pendant views (jsdom DOM, real HTTP and
// WebSocket) through the secondary acceptance script:
//   - jog-record-save makes the skill appear in the skills view
//   - running a sequence highlights states in RunReport order
//   - killing the gateway raises the stale banner and zeroes the jog

import { ChildProcess, spawn } from "node:child_process";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { WebSocket as NodeWebSocket } from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayApi } from "../src/api.js";
import { PendantApp } from "../src/app.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const SCENARIO = path.resolve(here, "../../src/reconcell/data/demo_screw.json");

let proc: ChildProcess;
let base: string;
let app: PendantApp;
let api: GatewayApi;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as net.AddressInfo).port;
      srv.close(() => resolve(port));
    });
    srv.on("error", reject);
  });
}

async function until(fn: () => Promise<boolean> | boolean, timeoutMs = 60_000, stepMs = 50) {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      if (await fn()) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, stepMs));
  }
  throw new Error("condition not reached in time");
}

beforeAll(async () => {
  (globalThis as Record<string, unknown>).WebSocket = NodeWebSocket;
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    "python3",
    ["-m", "reconcell.cli", "up", "--scenario", SCENARIO, "--port", String(port),
     "--run-tape", "--max-speed"],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await until(async () => (await fetch(`${base}/v1/cell`)).ok);

  document.body.innerHTML = '<div id="app"></div>';
  app = new PendantApp(document, document.getElementById("app")!, base,
    `ws://127.0.0.1:${port}/v1/stream`);
  api = app.api;
  app.start();
  await until(() => app.stream.connected);
});

afterAll(() => {
  app?.stop();
  proc?.kill();
});

describe("pendant against a live cell", () => {
  it("dashboard lists the scenario modules", async () => {
    await app.dashboard.refresh();
    const rows = [...document.querySelectorAll(".modules tbody tr")].map(
      (tr) => (tr as HTMLElement).dataset.name,
    );
    expect(rows).toEqual(expect.arrayContaining(["r1", "table1", "rack1", "fix1"]));
    expect(app.banner.classList.contains("hidden")).toBe(true);
  });

  it("records a jogged demonstration and shows it in the skills view", async () => {
    app.jog.robot = "r1";
    // deflect, record a stretch of simulated motion, release
    app.jog.left.set(0.4, 0.3);
    await until(() => app.stream.sentJogFrames.length > 0, 10_000);
    await app.jog.startRecording();
    await new Promise((r) => setTimeout(r, 600)); // sim races ahead of wall time
    app.jog.left.set(0, 0);
    const saved = await app.jog.stopAndSave();
    expect(saved).not.toBeNull();
    expect(saved!.name).toBe("demo");
    expect(saved!.version).toBe(1);

    await app.skills.refresh();
    expect(app.skills.has("demo", 1)).toBe(true);
    const row = document.querySelector('tr[data-skill="demo"]');
    expect(row).not.toBeNull();
    expect(row!.textContent).toContain("demo");
    expect(row!.textContent).toContain("@1");

    await app.skills.inspect("demo");
    expect(document.querySelector(".skill-detail")!.textContent).toContain("demo@1");
  });

  it("compiles with inline diagnostics on bad source", async () => {
    const textarea = app.sequences.element.querySelector<HTMLTextAreaElement>(
      '[data-role="source"]',
    )!;
    textarea.value = "sequence broken { state a wait 1; }";
    await app.sequences.compile();
    const diag = app.sequences.element.querySelector('[data-role="diagnostics"]')!;
    expect(diag.classList.contains("error")).toBe(true);
    expect(diag.textContent).toContain("syntax_error");
    expect(diag.textContent).toContain("1:27");
  });

  it("runs a sequence and highlights states in RunReport order", async () => {
    await app.sequences.refresh();
    await app.sequences.select("demo_screw");
    // graph rendered: one box per state
    const boxes = app.sequences.element.querySelectorAll(".fsm-state");
    expect(boxes.length).toBeGreaterThan(10);
    expect(app.sequences.element.querySelector('[data-role="dot"]')!.textContent).toContain(
      "digraph",
    );

    const runId = await app.sequences.run();
    expect(runId).not.toBeNull();
    await until(async () => (await api.run(runId!)).final_outcome !== null, 90_000, 200);
    const report = await api.run(runId!);
    expect(report.final_outcome).toBe("END_SUCCESS");

    // every state entry reached the UI, in execution order
    await until(
      () => app.sequences.highlightLog.length >= report.records.length, 10_000, 100);
    expect(app.sequences.highlightLog).toEqual(report.records.map((r) => r.state));
  });

  it("raises the stale banner and zeroes jog on gateway loss", async () => {
    app.jog.left.set(0.5, 0);
    await until(() => {
      const f = app.stream.sentJogFrames;
      return f.length > 0 && f[f.length - 1].lin.some((v) => v !== 0);
    }, 10_000);
    proc.kill("SIGKILL");
    await until(() => !app.stream.connected, 15_000);
    // once the drop is detected no jog frame leaves, even though the
    // stick is still deflected
    const framesAtDetect = app.stream.sentJogFrames.length;
    await new Promise((r) => setTimeout(r, 300));
    expect(app.stream.sentJogFrames.length).toBe(framesAtDetect);
    await until(() => !app.banner.classList.contains("hidden"), 5_000);
  });
});
