/** Cell dashboard: live module table, robot tcp pose, rotary table angle,
 * all fed by the stream mirror with a periodic snapshot refresh. */

import { CellSnapshot, GatewayApi } from "../api.js";
import { CellStream, StreamFrame } from "../stream.js";

export class DashboardView {
  readonly element: HTMLElement;
  private modulesBody: HTMLElement;
  private robotLine: HTMLElement;
  private tableLine: HTMLElement;
  private snapshot: CellSnapshot | null = null;
  private tableAngles = new Map<string, { angle: number; brake: string }>();

  constructor(
    doc: Document,
    private api: GatewayApi,
    private stream: CellStream,
  ) {
    this.element = doc.createElement("section");
    this.element.className = "view dashboard";
    this.element.innerHTML = `
      <h2>Cell</h2>
      <div class="robot-line" data-role="robot">robot: -</div>
      <div class="table-line" data-role="table">tables: -</div>
      <table class="modules">
        <thead><tr><th>id</th><th>name</th><th>kind</th><th>state</th><th>tool</th></tr></thead>
        <tbody data-role="modules"></tbody>
      </table>`;
    this.modulesBody = this.element.querySelector('[data-role="modules"]')!;
    this.robotLine = this.element.querySelector('[data-role="robot"]')!;
    this.tableLine = this.element.querySelector('[data-role="table"]')!;
    stream.onEvent((f) => this.onFrame(f));
  }

  async refresh(): Promise<void> {
    this.snapshot = await this.api.cell();
    this.renderModules();
    this.renderLines();
  }

  private onFrame(frame: StreamFrame): void {
    if (frame.t === "robot_state") {
      this.renderLines();
      return;
    }
    if (frame.kind === "BRAKE_CHANGED") {
      this.tableAngles.set(frame.source, {
        angle: frame.payload["angle"] as number,
        brake: frame.payload["brake"] as string,
      });
      this.renderLines();
    }
    if (["ATTACHED", "DETACHED", "ONLINE", "OFFLINE", "TOOL_CHANGED"].includes(frame.kind)) {
      void this.refresh();
    }
  }

  private renderModules(): void {
    if (!this.snapshot) return;
    this.modulesBody.textContent = "";
    const doc = this.element.ownerDocument;
    for (const m of this.snapshot.modules) {
      const tr = doc.createElement("tr");
      const tool = this.snapshot.equipped_tools[m.module_id];
      for (const cellText of [
        m.module_id,
        m.descriptor.name,
        m.descriptor.kind,
        m.state,
        tool ? tool.tool_id : "",
      ]) {
        const td = doc.createElement("td");
        td.textContent = cellText;
        tr.appendChild(td);
      }
      tr.dataset.name = m.descriptor.name;
      this.modulesBody.appendChild(tr);
    }
  }

  private renderLines(): void {
    const states = [...this.stream.robotStates.values()];
    if (states.length > 0) {
      const s = states[0];
      const [x, y, z] = s.tcp.p;
      this.robotLine.textContent =
        `robot: ${s.mode} tcp=(${x.toFixed(3)}, ${y.toFixed(3)}, ${z.toFixed(3)})` +
        (s.tool ? ` tool=${s.tool.tool_id}` : "");
    }
    if (this.tableAngles.size > 0) {
      const parts = [...this.tableAngles.entries()].map(
        ([, v]) => `${((v.angle * 180) / Math.PI).toFixed(1)}° ${v.brake}`,
      );
      this.tableLine.textContent = `tables: ${parts.join(", ")}`;
    }
  }
}
