/** Sequence workshop: submit DSL text, inline compile diagnostics, FSM
 * graph drawn from the IR (dot text available too), run with live
 * active-state highlighting from STATE_ENTERED events. */

import { GatewayApi, GatewayError, SequenceIRDoc } from "../api.js";
import { CellStream, StreamFrame } from "../stream.js";

export class SequencesView {
  readonly element: HTMLElement;
  private diagnostics: HTMLElement;
  private listEl: HTMLElement;
  private graphEl: HTMLElement;
  private dotEl: HTMLElement;
  private runStatus: HTMLElement;
  private source: HTMLTextAreaElement;
  selected: string | null = null;
  activeRunId: string | null = null;
  /** state ids highlighted during the current run, in entry order */
  highlightLog: string[] = [];

  constructor(
    doc: Document,
    private api: GatewayApi,
    stream: CellStream,
  ) {
    this.element = doc.createElement("section");
    this.element.className = "view sequences";
    this.element.innerHTML = `
      <h2>Sequences</h2>
      <textarea data-role="source" rows="8" cols="60" spellcheck="false"
        placeholder="sequence hello { state a: wait 0.5; }"></textarea>
      <div>
        <button data-role="compile">compile</button>
        <button data-role="validate" disabled>validate</button>
        <button data-role="run" disabled>run</button>
        <span data-role="run-status" class="status"></span>
      </div>
      <div class="diagnostics" data-role="diagnostics"></div>
      <ul class="sequence-list" data-role="list"></ul>
      <div class="graph" data-role="graph"></div>
      <details><summary>dot source</summary><pre data-role="dot"></pre></details>`;
    this.source = this.element.querySelector('[data-role="source"]')!;
    this.diagnostics = this.element.querySelector('[data-role="diagnostics"]')!;
    this.listEl = this.element.querySelector('[data-role="list"]')!;
    this.graphEl = this.element.querySelector('[data-role="graph"]')!;
    this.dotEl = this.element.querySelector('[data-role="dot"]')!;
    this.runStatus = this.element.querySelector('[data-role="run-status"]')!;
    this.element
      .querySelector('[data-role="compile"]')!
      .addEventListener("click", () => void this.compile());
    this.element
      .querySelector('[data-role="validate"]')!
      .addEventListener("click", () => void this.validate());
    this.element
      .querySelector('[data-role="run"]')!
      .addEventListener("click", () => void this.run());
    stream.onEvent((f) => this.onFrame(f));
  }

  async refresh(): Promise<void> {
    const names = (await this.api.sequences()).sequences;
    const doc = this.element.ownerDocument;
    this.listEl.textContent = "";
    for (const name of names) {
      const li = doc.createElement("li");
      const btn = doc.createElement("button");
      btn.textContent = name;
      btn.addEventListener("click", () => void this.select(name));
      li.appendChild(btn);
      this.listEl.appendChild(li);
    }
  }

  async compile(): Promise<void> {
    this.diagnostics.textContent = "";
    this.diagnostics.classList.remove("error");
    try {
      const result = await this.api.compile(this.source.value);
      this.diagnostics.textContent =
        `compiled ${result.name}: ${result.states} states, hash ${result.source_hash.slice(0, 12)}`;
      await this.refresh();
      await this.select(result.name);
    } catch (err) {
      if (err instanceof GatewayError) {
        this.diagnostics.classList.add("error");
        this.diagnostics.textContent = `${err.code}: ${err.detail}`;
      } else {
        throw err;
      }
    }
  }

  async select(name: string): Promise<void> {
    this.selected = name;
    this.element.querySelector<HTMLButtonElement>('[data-role="validate"]')!.disabled = false;
    this.element.querySelector<HTMLButtonElement>('[data-role="run"]')!.disabled = false;
    const ir = await this.api.ir(name);
    this.renderGraph(ir);
    this.dotEl.textContent = await this.api.dot(name);
  }

  private renderGraph(ir: SequenceIRDoc): void {
    const doc = this.element.ownerDocument;
    this.graphEl.textContent = "";
    const title = doc.createElement("h3");
    title.textContent = ir.name;
    this.graphEl.appendChild(title);
    const chain = doc.createElement("div");
    chain.className = "fsm";
    for (const state of ir.states) {
      const box = doc.createElement("div");
      box.className = "fsm-state";
      box.dataset.state = state.id;
      const action = state.action;
      const label =
        action.type === "skill"
          ? `skill "${action.skill}" on ${action.robot}`
          : action.type === "cmd"
            ? `cmd ${action.module}.${action.verb}`
            : action.type === "wait"
              ? `wait ${action.duration}`
              : "noop";
      box.innerHTML = `<strong>${state.id}</strong><br><small>${label}</small>`;
      const edges = doc.createElement("small");
      edges.className = "fsm-edges";
      edges.textContent = Object.entries(state.transitions)
        .map(([o, t]) => `${o}→${t}`)
        .join("  ");
      box.appendChild(edges);
      chain.appendChild(box);
    }
    this.graphEl.appendChild(chain);
  }

  async validate(): Promise<void> {
    if (!this.selected) return;
    const report = await this.api.validateSeq(this.selected);
    this.diagnostics.classList.toggle("error", !report.runnable);
    this.diagnostics.textContent = report.findings.length
      ? report.findings.map((f) => `${f.severity} ${f.kind} @${f.state}: ${f.detail}`).join("\n")
      : "runnable: no findings";
  }

  async run(): Promise<string | null> {
    if (!this.selected) return null;
    this.highlightLog = [];
    try {
      const { run_id } = await this.api.runSeq(this.selected);
      this.activeRunId = run_id;
      this.runStatus.textContent = `running ${run_id}...`;
      return run_id;
    } catch (err) {
      if (err instanceof GatewayError) {
        this.diagnostics.classList.add("error");
        this.diagnostics.textContent =
          `${err.code}: ${err.detail}` +
          (err.findings ? "\n" + err.findings.map((f) => `${f.kind} @${f.state}`).join("\n") : "");
        return null;
      }
      throw err;
    }
  }

  private onFrame(frame: StreamFrame): void {
    if (frame.t !== "evt" || this.activeRunId === null) return;
    if (frame.kind === "STATE_ENTERED" && frame.payload["run_id"] === this.activeRunId) {
      const stateId = frame.payload["state"] as string;
      this.highlightLog.push(stateId);
      for (const el of this.graphEl.querySelectorAll(".fsm-state")) {
        el.classList.toggle("active", (el as HTMLElement).dataset.state === stateId);
      }
    }
    if (frame.kind === "RUN_FINISHED" && frame.payload["run_id"] === this.activeRunId) {
      this.runStatus.textContent = `${this.activeRunId}: ${frame.payload["outcome"]}`;
      this.activeRunId = null;
      for (const el of this.graphEl.querySelectorAll(".fsm-state.active")) {
        el.classList.remove("active");
      }
    }
  }
}
