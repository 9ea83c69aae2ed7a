/** Jog/teach view: two virtual sticks (left: linear x/y, right: linear z +
 * yaw) feeding the stream's rate-limited jog channel, plus recording
 * controls. An attached gamepad, when present, overrides the virtual
 * sticks each animation frame. */

import { GatewayApi } from "../api.js";
import { VirtualJoystick } from "../joystick.js";
import { CellStream, Vec3 } from "../stream.js";

export class JogView {
  readonly element: HTMLElement;
  readonly left: VirtualJoystick;
  readonly right: VirtualJoystick;
  robot = "r1";
  sessionId: string | null = null;
  private status: HTMLElement;
  private lin: Vec3 = [0, 0, 0];
  private ang: Vec3 = [0, 0, 0];

  constructor(
    doc: Document,
    private api: GatewayApi,
    private stream: CellStream,
  ) {
    this.element = doc.createElement("section");
    this.element.className = "view jog";
    this.element.innerHTML = `
      <h2>Jog &amp; teach</h2>
      <div class="jog-controls">
        <label>robot <input data-role="robot" value="r1" size="6"></label>
        <span class="sticks" data-role="sticks"></span>
      </div>
      <div class="record-controls">
        <label>skill name <input data-role="skill-name" value="demo" size="12"></label>
        <label>rate <input data-role="rate" value="50" size="4"></label>
        <button data-role="record">record</button>
        <button data-role="stop-save" disabled>stop &amp; save</button>
        <span class="status" data-role="status"></span>
      </div>`;
    const sticks = this.element.querySelector('[data-role="sticks"]')!;
    this.left = new VirtualJoystick(doc, "lin x/y", (x, y) => {
      this.lin = [y, -x, this.lin[2]]; // stick up = +x (away), right = -y
      this.push();
    });
    this.right = new VirtualJoystick(doc, "z / yaw", (x, y) => {
      this.lin = [this.lin[0], this.lin[1], y];
      this.ang = [0, 0, -x];
      this.push();
    });
    sticks.appendChild(this.left.element);
    sticks.appendChild(this.right.element);
    this.status = this.element.querySelector('[data-role="status"]')!;

    const robotInput = this.element.querySelector<HTMLInputElement>('[data-role="robot"]')!;
    robotInput.addEventListener("change", () => {
      this.robot = robotInput.value;
    });
    this.element
      .querySelector<HTMLButtonElement>('[data-role="record"]')!
      .addEventListener("click", () => void this.startRecording());
    this.element
      .querySelector<HTMLButtonElement>('[data-role="stop-save"]')!
      .addEventListener("click", () => void this.stopAndSave());
  }

  private push(): void {
    this.stream.setJog(this.robot, this.lin, this.ang);
  }

  /** Merge a gamepad sample (browser Gamepad API axes layout). */
  applyGamepad(axes: readonly number[]): void {
    const dead = (v: number) => (Math.abs(v) < 0.08 ? 0 : v);
    this.left.set(dead(axes[0] ?? 0), -dead(axes[1] ?? 0));
    this.right.set(dead(axes[2] ?? 0), -dead(axes[3] ?? 0));
  }

  async startRecording(): Promise<void> {
    const rate = Number(
      this.element.querySelector<HTMLInputElement>('[data-role="rate"]')!.value,
    );
    const { session_id } = await this.api.recordStart(this.robot, rate);
    this.sessionId = session_id;
    this.element.querySelector<HTMLButtonElement>('[data-role="record"]')!.disabled = true;
    this.element.querySelector<HTMLButtonElement>('[data-role="stop-save"]')!.disabled = false;
    this.status.textContent = `recording ${session_id}...`;
  }

  async stopAndSave(): Promise<{ name: string; version: number } | null> {
    if (!this.sessionId) return null;
    const name = this.element.querySelector<HTMLInputElement>('[data-role="skill-name"]')!.value;
    const stopped = await this.api.recordStop(this.sessionId);
    const saved = await this.api.teachSave(this.sessionId, name);
    this.sessionId = null;
    this.element.querySelector<HTMLButtonElement>('[data-role="record"]')!.disabled = false;
    this.element.querySelector<HTMLButtonElement>('[data-role="stop-save"]')!.disabled = true;
    this.status.textContent = `saved ${saved.name}@${saved.version} (${stopped.samples} samples)`;
    return saved;
  }
}
