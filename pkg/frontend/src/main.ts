/**
 * Browser entry point: URL query picks the scene (?scene=room), the toolbar
 * drives the controller, and every store change redraws. All behavior
 * worth testing lives in state.ts / controller.ts; this file is wiring.
 */

import { HttpApi } from "./api.js";
import { framingPose, panned, rotated, zoomed } from "./camera.js";
import { SessionController } from "./controller.js";
import { instanceColor, PointRenderer, statusLine, type SceneGeometry } from "./renderer.js";
import { segmentOwner } from "./state.js";

const params = new URLSearchParams(window.location.search);
const sceneId = params.get("scene") ?? "room";
const apiBase = params.get("api") ?? "http://localhost:8008";
const stride = Math.max(1, Number(params.get("stride") ?? "1"));

const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const toolbar = document.getElementById("classes") as HTMLDivElement;
const addButton = document.getElementById("add") as HTMLButtonElement;
const statusBar = document.getElementById("status") as HTMLDivElement;
const toastBox = document.getElementById("toast") as HTMLDivElement;
const emptyBox = document.getElementById("empty") as HTMLDivElement;
const gtInput = document.getElementById("gt-file") as HTMLInputElement;
const modeButtons = Array.from(
  document.querySelectorAll<HTMLButtonElement>("button[data-mode]"),
);

const controller = SessionController.create(new HttpApi(apiBase, sceneId), sceneId);
const renderer = new PointRenderer(canvas);
let geometry: SceneGeometry | null = null;
let frame = 0;

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  scheduleDraw();
}

function scheduleDraw(): void {
  if (frame) return;
  frame = requestAnimationFrame(() => {
    frame = 0;
    if (geometry) renderer.draw(geometry, controller.store.getState());
  });
}

function renderChrome(): void {
  const state = controller.store.getState();
  toastBox.textContent = state.toast ?? "";
  toastBox.style.display = state.toast ? "block" : "none";
  emptyBox.style.display =
    state.mode === "results" && state.resultMissing ? "flex" : "none";
  statusBar.textContent = statusLine(state, geometry);
  const owner =
    state.hovered && segmentOwner(state.labels, state.hovered.segment);
  if (owner) {
    const [r, g, b] = instanceColor(owner.instance);
    statusBar.style.borderLeft = `12px solid rgb(${r * 255},${g * 255},${b * 255})`;
  } else {
    statusBar.style.borderLeft = "12px solid transparent";
  }
  for (const button of modeButtons) {
    button.classList.toggle("active", button.dataset.mode === state.mode);
  }
  for (const button of toolbar.querySelectorAll("button")) {
    button.classList.toggle(
      "active",
      Number(button.dataset.class) === state.currentClass,
    );
  }
}

function buildClassButtons(classes: Record<string, string>): void {
  toolbar.textContent = "";
  for (const [id, name] of Object.entries(classes)) {
    const button = document.createElement("button");
    button.dataset.class = id;
    button.textContent = name;
    button.addEventListener("click", () => controller.selectClass(Number(id)));
    toolbar.appendChild(button);
  }
}

controller.store.subscribe(() => {
  renderChrome();
  scheduleDraw();
});

addButton.addEventListener("click", () => controller.pressAdd());
for (const button of modeButtons) {
  button.addEventListener("click", () =>
    void controller.setMode(button.dataset.mode as never),
  );
}
gtInput.addEventListener("change", async () => {
  const file = gtInput.files?.[0];
  if (!file) return;
  const parsed = JSON.parse(await file.text());
  if (Array.isArray(parsed.instance)) {
    controller.loadGroundTruth(parsed.instance);
  }
});

let dragging = false;
let panDrag = false;
let moved = 0;
let lastX = 0;
let lastY = 0;

canvas.addEventListener("mousedown", (ev) => {
  dragging = true;
  panDrag = ev.button === 2 || ev.shiftKey;
  moved = 0;
  lastX = ev.offsetX;
  lastY = ev.offsetY;
});
canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());
canvas.addEventListener("mousemove", (ev) => {
  if (dragging) {
    const dx = ev.offsetX - lastX;
    const dy = ev.offsetY - lastY;
    moved += Math.abs(dx) + Math.abs(dy);
    lastX = ev.offsetX;
    lastY = ev.offsetY;
    const pose = controller.store.getState().camera;
    controller.store.dispatch({
      type: "SET_CAMERA",
      pose: panDrag ? panned(pose, dx, dy) : rotated(pose, dx, dy),
    });
  } else {
    controller.hoverAt(renderer.pick(ev.offsetX, ev.offsetY));
  }
});
window.addEventListener("mouseup", () => {
  dragging = false;
});
canvas.addEventListener("click", (ev) => {
  if (moved > 4) return; // that was a drag, not a click
  controller.hoverAt(renderer.pick(ev.offsetX, ev.offsetY));
  void controller.commitClick();
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const pose = controller.store.getState().camera;
  controller.store.dispatch({
    type: "SET_CAMERA",
    pose: zoomed(pose, ev.deltaY > 0 ? 1.1 : 0.9),
  });
});
window.addEventListener("resize", resize);

async function boot(): Promise<void> {
  let scene;
  try {
    scene = await controller.init(stride);
  } catch (err) {
    statusBar.textContent = `failed to load scene ${sceneId}: ${String(err)}`;
    return;
  }
  geometry = { points: scene.points, colors: scene.colors };
  buildClassButtons(controller.store.getState().classes);
  controller.store.dispatch({
    type: "SET_CAMERA",
    pose: framingPose(geometry.points),
  });
  resize();
}

void boot();
