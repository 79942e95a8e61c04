/**
 * Orbit camera over a z-up scene plus the projection used for both drawing
 * and picking. No external math library: four dot products per point.
 */

import type { CameraPose } from "./state.js";

export interface Basis {
  eye: [number, number, number];
  right: [number, number, number];
  up: [number, number, number];
  forward: [number, number, number];
}

const NEAR = 0.05;

export function cameraBasis(pose: CameraPose): Basis {
  const cp = Math.cos(pose.pitch);
  const sp = Math.sin(pose.pitch);
  const cy = Math.cos(pose.yaw);
  const sy = Math.sin(pose.yaw);
  const eye: [number, number, number] = [
    pose.target[0] + pose.distance * cp * cy,
    pose.target[1] + pose.distance * cp * sy,
    pose.target[2] + pose.distance * sp,
  ];
  const forward: [number, number, number] = [-cp * cy, -cp * sy, -sp];
  // right = forward x worldUp, normalized; degenerate only at pitch = ±90°
  const right: [number, number, number] = [-sy, cy, 0];
  const up: [number, number, number] = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  // up is negated so that world-up maps to decreasing canvas y
  return { eye, right, up: [-up[0], -up[1], -up[2]], forward };
}

/**
 * Project one point. Returns screen x/y in pixels, camera-space depth, and
 * whether the point is in front of the near plane.
 */
export function project(
  p: number[],
  basis: Basis,
  width: number,
  height: number,
  fovY = Math.PI / 3,
): { x: number; y: number; depth: number; visible: boolean } {
  const vx = p[0] - basis.eye[0];
  const vy = p[1] - basis.eye[1];
  const vz = p[2] - basis.eye[2];
  const depth =
    vx * basis.forward[0] + vy * basis.forward[1] + vz * basis.forward[2];
  if (depth < NEAR) return { x: 0, y: 0, depth, visible: false };
  const cx = vx * basis.right[0] + vy * basis.right[1] + vz * basis.right[2];
  const cy = vx * basis.up[0] + vy * basis.up[1] + vz * basis.up[2];
  const focal = height / 2 / Math.tan(fovY / 2);
  return {
    x: width / 2 + (cx / depth) * focal,
    y: height / 2 + (cy / depth) * focal,
    depth,
    visible: true,
  };
}

/** A pose that frames the whole point set. */
export function framingPose(points: number[][]): CameraPose {
  if (points.length === 0) {
    return { yaw: 0.8, pitch: 0.9, distance: 8, target: [0, 0, 0] };
  }
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (const p of points) {
    for (let a = 0; a < 3; a++) {
      if (p[a] < lo[a]) lo[a] = p[a];
      if (p[a] > hi[a]) hi[a] = p[a];
    }
  }
  const diag = Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
  return {
    yaw: 0.8,
    pitch: 0.7,
    distance: Math.max(1, diag * 1.2),
    target: [
      (lo[0] + hi[0]) / 2,
      (lo[1] + hi[1]) / 2,
      (lo[2] + hi[2]) / 2,
    ],
  };
}

export function rotated(pose: CameraPose, dx: number, dy: number): CameraPose {
  const limit = Math.PI / 2 - 0.01;
  return {
    ...pose,
    yaw: pose.yaw - dx * 0.008,
    pitch: Math.min(limit, Math.max(-limit, pose.pitch + dy * 0.008)),
  };
}

export function zoomed(pose: CameraPose, factor: number): CameraPose {
  return {
    ...pose,
    distance: Math.min(200, Math.max(0.2, pose.distance * factor)),
  };
}

export function panned(pose: CameraPose, dx: number, dy: number): CameraPose {
  const basis = cameraBasis(pose);
  const scale = pose.distance * 0.0015;
  return {
    ...pose,
    target: [
      pose.target[0] - (basis.right[0] * dx + basis.up[0] * dy) * scale,
      pose.target[1] - (basis.right[1] * dx + basis.up[1] * dy) * scale,
      pose.target[2] - (basis.right[2] * dx + basis.up[2] * dy) * scale,
    ],
  };
}
