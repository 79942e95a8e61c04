/**
 * Canvas-2D point splatter. Points are depth-sorted and drawn as small
 * squares; picking returns the nearest projected point within a pixel
 * radius, which doubles as a poor man's ray cast against the splats.
 */

import { cameraBasis, project } from "./camera.js";
import {
  completedGtInstances,
  segmentOwner,
  type SessionState,
} from "./state.js";

const PICK_RADIUS = 8;
const SPLAT = 3;

/** Stable per-instance color (golden-angle hue walk). */
export function instanceColor(instance: number): [number, number, number] {
  const h = ((instance * 137.50776) % 360) / 60;
  const c = 0.8;
  const x = c * (1 - Math.abs((h % 2) - 1));
  const [r, g, b] =
    h < 1 ? [c, x, 0]
    : h < 2 ? [x, c, 0]
    : h < 3 ? [0, c, x]
    : h < 4 ? [0, x, c]
    : h < 5 ? [x, 0, c]
    : [c, 0, x];
  return [r + 0.15, g + 0.15, b + 0.15];
}

function channel(v: number): number {
  return Math.max(0, Math.min(255, Math.round(v * 255)));
}

export interface SceneGeometry {
  points: number[][];
  colors: number[][];
}

export class PointRenderer {
  private ctx: CanvasRenderingContext2D;
  private projectedX: Float32Array = new Float32Array(0);
  private projectedY: Float32Array = new Float32Array(0);
  private projectedZ: Float32Array = new Float32Array(0);

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
  }

  draw(scene: SceneGeometry, state: SessionState): void {
    const { width, height } = this.canvas;
    const basis = cameraBasis(state.camera);
    const n = scene.points.length;
    if (this.projectedX.length !== n) {
      this.projectedX = new Float32Array(n);
      this.projectedY = new Float32Array(n);
      this.projectedZ = new Float32Array(n);
    }
    const order: number[] = [];
    for (let i = 0; i < n; i++) {
      const pr = project(scene.points[i], basis, width, height);
      this.projectedZ[i] = pr.visible ? pr.depth : -1;
      if (!pr.visible) continue;
      this.projectedX[i] = pr.x;
      this.projectedY[i] = pr.y;
      order.push(i);
    }
    order.sort((a, b) => this.projectedZ[b] - this.projectedZ[a]);

    const ctx = this.ctx;
    ctx.fillStyle = "#181a1f";
    ctx.fillRect(0, 0, width, height);
    const gtDone = state.mode === "with-gt" ? completedGtInstances(state) : null;
    const labelOfSegment = new Map<number, number>();
    for (const label of state.labels) {
      labelOfSegment.set(label.segment, label.instance);
    }

    for (const i of order) {
      let r: number;
      let g: number;
      let b: number;
      if (state.mode === "results") {
        const instance = state.result?.instance[i * state.stride] ?? -1;
        [r, g, b] = instance < 0 ? [1, 1, 1] : instanceColor(instance);
      } else {
        [r, g, b] = scene.colors[i];
        const seg = state.segIndices[i];
        if (gtDone) {
          const gt = state.gtInstance?.[i * state.stride] ?? -1;
          if (gt >= 0 && gtDone.has(gt)) [r, g, b] = [1, 1, 1];
        }
        const owner = labelOfSegment.get(seg);
        if (owner !== undefined) [r, g, b] = instanceColor(owner);
        if (state.hovered !== null && seg === state.hovered.segment) {
          r = r * 0.35 + 0.65;
          g *= 0.35;
          b *= 0.35;
        }
      }
      ctx.fillStyle = `rgb(${channel(r)},${channel(g)},${channel(b)})`;
      ctx.fillRect(
        this.projectedX[i] - SPLAT / 2,
        this.projectedY[i] - SPLAT / 2,
        SPLAT,
        SPLAT,
      );
    }

    if (state.mode === "results" && state.result) {
      this.drawClickMarkers(scene, state, basis, width, height);
    }
  }

  /** Red spheres marking where each committed click landed. */
  private drawClickMarkers(
    scene: SceneGeometry,
    state: SessionState,
    basis: ReturnType<typeof cameraBasis>,
    width: number,
    height: number,
  ): void {
    const ctx = this.ctx;
    for (const click of state.result?.clicks ?? []) {
      const displayed = Math.round(click.point / state.stride);
      const p = scene.points[displayed];
      if (!p) continue;
      const pr = project(p, basis, width, height);
      if (!pr.visible) continue;
      const radius = Math.max(4, Math.min(14, 60 / pr.depth));
      const glow = ctx.createRadialGradient(
        pr.x - radius / 3, pr.y - radius / 3, radius / 4,
        pr.x, pr.y, radius,
      );
      glow.addColorStop(0, "#ff7a6e");
      glow.addColorStop(1, "#c41000");
      ctx.fillStyle = glow;
      ctx.beginPath();
      ctx.arc(pr.x, pr.y, radius, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  /** Displayed index of the nearest visible point within the pick radius. */
  pick(x: number, y: number): number | null {
    let best = -1;
    let bestDist = PICK_RADIUS * PICK_RADIUS;
    for (let i = 0; i < this.projectedZ.length; i++) {
      if (this.projectedZ[i] < 0) continue;
      const dx = this.projectedX[i] - x;
      const dy = this.projectedY[i] - y;
      const d = dx * dx + dy * dy;
      if (d < bestDist || (d === bestDist && best >= 0 && this.projectedZ[i] < this.projectedZ[best])) {
        best = i;
        bestDist = d;
      }
    }
    return best >= 0 ? best : null;
  }
}

/** Status-bar text: cursor position, segment, and owner if labeled. */
export function statusLine(
  state: SessionState,
  scene: SceneGeometry | null,
): string {
  if (state.mode === "results") {
    return state.resultMissing
      ? "no grouped result yet — run the grouping stage first"
      : `results: ${state.result?.clicks.length ?? 0} annotated instances`;
  }
  if (state.hovered === null || !scene) {
    return `${state.labels.length} instances labeled`;
  }
  const p = scene.points[state.hovered.point];
  const xyz = p ? p.map((v) => v.toFixed(2)).join(", ") : "?";
  const owner = segmentOwner(state.labels, state.hovered.segment);
  const ownership =
    owner === undefined
      ? ""
      : ` — instance ${owner.instance} (${state.classes[String(owner.class)] ?? owner.class})`;
  return `(${xyz})  segment ${state.hovered.segment}${ownership}`;
}
