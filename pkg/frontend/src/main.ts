/** Browser entry point: same-origin gateway unless ?gateway= overrides. */

import { PendantApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const httpBase = params.get("gateway") ?? "";
const wsBase = httpBase
  ? httpBase.replace(/^http/, "ws")
  : `${window.location.protocol === "https:" ? "wss" : "ws"}://${window.location.host}`;

const app = new PendantApp(document, document.getElementById("app")!, httpBase, `${wsBase}/v1/stream`);
app.start();

function frame() {
  app.pollGamepad(navigator);
  window.requestAnimationFrame(frame);
}
if (typeof window.requestAnimationFrame === "function") {
  window.requestAnimationFrame(frame);
}
