/** Virtual analog stick: a base circle with a draggable knob, normalized
 * axes in [-1, 1]. Pointer-driven, with arrow-key nudging when focused.
 * Releasing the pointer snaps back to center (spring return). */

export class VirtualJoystick {
  readonly element: HTMLDivElement;
  private knob: HTMLDivElement;
  private pointerId: number | null = null;
  private radius = 60;

  axisX = 0; // right positive
  axisY = 0; // up positive

  constructor(
    doc: Document,
    public label: string,
    private onChange: (x: number, y: number) => void,
  ) {
    this.element = doc.createElement("div");
    this.element.className = "joystick";
    this.element.tabIndex = 0;
    const caption = doc.createElement("span");
    caption.className = "joystick-label";
    caption.textContent = label;
    this.knob = doc.createElement("div");
    this.knob.className = "joystick-knob";
    this.element.appendChild(caption);
    this.element.appendChild(this.knob);
    this.bind();
    this.render();
  }

  private bind(): void {
    this.element.addEventListener("pointerdown", (e) => {
      if (this.pointerId !== null) return;
      this.pointerId = e.pointerId;
      if (this.element.setPointerCapture) {
        this.element.setPointerCapture(e.pointerId);
      }
      this.track(e);
    });
    this.element.addEventListener("pointermove", (e) => {
      if (e.pointerId !== this.pointerId) return;
      this.track(e);
    });
    const release = (e: PointerEvent) => {
      if (e.pointerId !== this.pointerId) return;
      this.pointerId = null;
      this.set(0, 0); // spring return
    };
    this.element.addEventListener("pointerup", release);
    this.element.addEventListener("pointercancel", release);
    this.element.addEventListener("keydown", (e) => {
      const step = 0.25;
      if (e.key === "ArrowRight") this.set(Math.min(1, this.axisX + step), this.axisY);
      else if (e.key === "ArrowLeft") this.set(Math.max(-1, this.axisX - step), this.axisY);
      else if (e.key === "ArrowUp") this.set(this.axisX, Math.min(1, this.axisY + step));
      else if (e.key === "ArrowDown") this.set(this.axisX, Math.max(-1, this.axisY - step));
      else if (e.key === " ") this.set(0, 0);
      else return;
      e.preventDefault();
    });
  }

  private track(e: PointerEvent): void {
    const rect = this.element.getBoundingClientRect();
    const cx = rect.left + rect.width / 2;
    const cy = rect.top + rect.height / 2;
    this.radius = rect.width > 0 ? rect.width / 2 : this.radius;
    let x = (e.clientX - cx) / this.radius;
    let y = -(e.clientY - cy) / this.radius;
    const mag = Math.hypot(x, y);
    if (mag > 1) {
      x /= mag;
      y /= mag;
    }
    this.set(x, y);
  }

  set(x: number, y: number): void {
    this.axisX = x;
    this.axisY = y;
    this.render();
    this.onChange(x, y);
  }

  private render(): void {
    this.knob.style.left = `${50 + this.axisX * 40}%`;
    this.knob.style.top = `${50 - this.axisY * 40}%`;
  }
}
