/** Pendant shell: tab navigation, connection banner, gamepad polling. */

import { GatewayApi } from "./api.js";
import { CellStream, StreamOptions } from "./stream.js";
import { DashboardView } from "./views/dashboard.js";
import { JogView } from "./views/jog.js";
import { SkillsView } from "./views/skills.js";
import { SequencesView } from "./views/sequences.js";

export class PendantApp {
  readonly api: GatewayApi;
  readonly stream: CellStream;
  readonly dashboard: DashboardView;
  readonly jog: JogView;
  readonly skills: SkillsView;
  readonly sequences: SequencesView;
  readonly banner: HTMLElement;
  private staleTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    doc: Document,
    root: HTMLElement,
    httpBase: string,
    wsUrl: string,
    streamOpts: StreamOptions = {},
  ) {
    this.api = new GatewayApi(httpBase);
    this.stream = new CellStream(wsUrl, streamOpts);

    this.banner = doc.createElement("div");
    this.banner.className = "banner hidden";
    this.banner.textContent = "connection lost — data stale, jog zeroed";

    this.dashboard = new DashboardView(doc, this.api, this.stream);
    this.jog = new JogView(doc, this.api, this.stream);
    this.skills = new SkillsView(doc, this.api);
    this.sequences = new SequencesView(doc, this.api, this.stream);

    const nav = doc.createElement("nav");
    const main = doc.createElement("main");
    const views: [string, HTMLElement][] = [
      ["dashboard", this.dashboard.element],
      ["jog", this.jog.element],
      ["skills", this.skills.element],
      ["sequences", this.sequences.element],
    ];
    for (const [name, el] of views) {
      const btn = doc.createElement("button");
      btn.textContent = name;
      btn.dataset.tab = name;
      btn.addEventListener("click", () => this.show(name));
      nav.appendChild(btn);
      el.classList.add("hidden");
      main.appendChild(el);
    }
    root.append(this.banner, nav, main);
    this.show("dashboard");

    this.stream.onConnection((up) => this.banner.classList.toggle("hidden", up));
  }

  show(name: string): void {
    for (const el of [
      this.dashboard.element,
      this.jog.element,
      this.skills.element,
      this.sequences.element,
    ]) {
      el.classList.add("hidden");
    }
    const view = { dashboard: this.dashboard, jog: this.jog, skills: this.skills, sequences: this.sequences }[
      name as "dashboard"
    ];
    view.element.classList.remove("hidden");
    if (name === "dashboard") void this.dashboard.refresh();
    if (name === "skills") void this.skills.refresh();
    if (name === "sequences") void this.sequences.refresh();
  }

  start(): void {
    this.stream.connect();
    // visible staleness within 1 s of silence, even without a close event
    this.staleTimer = setInterval(() => {
      this.banner.classList.toggle("hidden", !this.stream.isStale());
    }, 250);
    void this.dashboard.refresh();
  }

  stop(): void {
    if (this.staleTimer) clearInterval(this.staleTimer);
    this.stream.close();
  }

  /** One gamepad poll (call from requestAnimationFrame when available). */
  pollGamepad(nav: Navigator): void {
    const pads = nav.getGamepads ? nav.getGamepads() : [];
    const pad = pads && pads[0];
    if (pad) this.jog.applyGamepad(pad.axes);
  }
}
