// Virtual stick unit tests (jsdom): normalization, clamping, spring return.

import { describe, expect, it } from "vitest";
import { VirtualJoystick } from "../src/joystick.js";

function pointerEvent(type: string, x: number, y: number, id = 1): Event {
  const ev = new MouseEvent(type, { clientX: x, clientY: y, bubbles: true });
  (ev as unknown as { pointerId: number }).pointerId = id;
  return ev;
}

function makeStick() {
  const calls: [number, number][] = [];
  const stick = new VirtualJoystick(document, "test", (x, y) => calls.push([x, y]));
  document.body.appendChild(stick.element);
  // jsdom reports zero-size rects; the stick falls back to its default
  // radius (60 px) centered at (0, 0)
  return { stick, calls };
}

describe("VirtualJoystick", () => {
  it("normalizes pointer displacement against the radius", () => {
    const { stick } = makeStick();
    stick.element.dispatchEvent(pointerEvent("pointerdown", 30, 0));
    expect(stick.axisX).toBeCloseTo(0.5, 10);
    expect(stick.axisY).toBeCloseTo(0, 10);
    stick.element.dispatchEvent(pointerEvent("pointermove", 0, -30));
    expect(stick.axisX).toBeCloseTo(0, 10);
    expect(stick.axisY).toBeCloseTo(0.5, 10); // screen up is positive y
  });

  it("clamps deflection to the unit circle", () => {
    const { stick } = makeStick();
    stick.element.dispatchEvent(pointerEvent("pointerdown", 600, -600));
    expect(Math.hypot(stick.axisX, stick.axisY)).toBeCloseTo(1.0, 10);
  });

  it("springs back to center on release", () => {
    const { stick, calls } = makeStick();
    stick.element.dispatchEvent(pointerEvent("pointerdown", 30, 30));
    stick.element.dispatchEvent(pointerEvent("pointerup", 30, 30));
    expect(stick.axisX).toBe(0);
    expect(stick.axisY).toBe(0);
    expect(calls[calls.length - 1]).toEqual([0, 0]);
  });

  it("ignores a second pointer while one is captured", () => {
    const { stick } = makeStick();
    stick.element.dispatchEvent(pointerEvent("pointerdown", 30, 0, 1));
    stick.element.dispatchEvent(pointerEvent("pointermove", -30, 0, 2));
    expect(stick.axisX).toBeCloseTo(0.5, 10);
  });

  it("keyboard nudges move in steps and space recenters", () => {
    const { stick } = makeStick();
    stick.element.dispatchEvent(new KeyboardEvent("keydown", { key: "ArrowRight", bubbles: true }));
    stick.element.dispatchEvent(new KeyboardEvent("keydown", { key: "ArrowUp", bubbles: true }));
    expect(stick.axisX).toBeCloseTo(0.25, 10);
    expect(stick.axisY).toBeCloseTo(0.25, 10);
    stick.element.dispatchEvent(new KeyboardEvent("keydown", { key: " ", bubbles: true }));
    expect([stick.axisX, stick.axisY]).toEqual([0, 0]);
  });
});
