/**
 * Pure session state for the annotation tool.
 *
 * The reducer never talks to the network: a click produces an optimistic
 * commit plus a `pending` record carrying the request to send and the
 * snapshot to restore, and the caller feeds the server's answer back in as
 * CLICK_ACK / CLICK_REJECTED. Same (state, event) in, same state out, so
 * the whole flow is testable without a browser.
 */

import type {
  ClickRequest,
  LabelEntry,
  LabelsPayload,
  ResultPayload,
  ScenePayload,
} from "./types.js";

export type Mode = "from-scratch" | "with-gt" | "results";

export interface CameraPose {
  yaw: number;
  pitch: number;
  distance: number;
  target: [number, number, number];
}

interface PendingClick {
  request: ClickRequest;
  /** Mirror fields as they were before the optimistic commit. */
  labels: LabelEntry[];
  nextInstance: number;
  currentClass: number | null;
  lastClass: number | null;
}

export interface SessionState {
  sceneId: string;
  mode: Mode;
  camera: CameraPose;
  /** Displayed (decimated) geometry; label indices stay full-scene. */
  stride: number;
  numPoints: number;
  segIndices: number[];
  classes: Record<string, string>;
  hovered: { point: number; segment: number } | null;
  currentClass: number | null;
  lastClass: number | null;
  nextInstance: number;
  labels: LabelEntry[];
  revision: number;
  pending: PendingClick | null;
  gtInstance: number[] | null;
  result: ResultPayload | null;
  resultMissing: boolean;
  toast: string | null;
}

export type SessionEvent =
  | { type: "SCENE_LOADED"; payload: ScenePayload }
  | { type: "CLASSES_LOADED"; classes: Record<string, string> }
  | { type: "LABELS_LOADED"; payload: LabelsPayload }
  | { type: "HOVER"; point: number | null }
  | { type: "SELECT_CLASS"; classId: number }
  | { type: "PRESS_ADD" }
  | { type: "CLICK" }
  | { type: "CLICK_ACK"; payload: LabelsPayload }
  | { type: "CLICK_REJECTED"; status: number; message: string }
  | { type: "SET_MODE"; mode: Mode }
  | { type: "RESULT_LOADED"; payload: ResultPayload }
  | { type: "RESULT_MISSING" }
  | { type: "GT_LOADED"; instance: number[] }
  | { type: "SET_CAMERA"; pose: CameraPose }
  | { type: "DISMISS_TOAST" };

export function initialState(sceneId: string): SessionState {
  return {
    sceneId,
    mode: "from-scratch",
    camera: { yaw: 0.8, pitch: 0.9, distance: 8, target: [0, 0, 0] },
    stride: 1,
    numPoints: 0,
    segIndices: [],
    classes: {},
    hovered: null,
    currentClass: null,
    lastClass: null,
    nextInstance: 0,
    labels: [],
    revision: 0,
    pending: null,
    gtInstance: null,
    result: null,
    resultMissing: false,
    toast: null,
  };
}

/** The label owning a segment, if any. */
export function segmentOwner(
  labels: LabelEntry[],
  segment: number,
): LabelEntry | undefined {
  return labels.find((l) => l.segment === segment);
}

function nextAfter(labels: LabelEntry[]): number {
  return labels.reduce((n, l) => Math.max(n, l.instance + 1), 0);
}

export function reduce(
  state: SessionState,
  event: SessionEvent,
): SessionState {
  switch (event.type) {
    case "SCENE_LOADED": {
      const { segIndices, stride, numPoints } = event.payload;
      return { ...state, segIndices, stride, numPoints, hovered: null };
    }

    case "CLASSES_LOADED":
      return { ...state, classes: { ...state.classes, ...event.classes } };

    case "LABELS_LOADED": {
      const { labels, revision, classes } = event.payload;
      return {
        ...state,
        labels,
        revision,
        classes: { ...state.classes, ...classes },
        nextInstance: nextAfter(labels),
      };
    }

    case "HOVER": {
      if (event.point === null) return { ...state, hovered: null };
      const segment = state.segIndices[event.point];
      if (segment === undefined) return { ...state, hovered: null };
      return { ...state, hovered: { point: event.point, segment } };
    }

    case "SELECT_CLASS":
      return { ...state, currentClass: event.classId };

    case "PRESS_ADD":
      if (state.lastClass === null) {
        return { ...state, toast: "choose a class first" };
      }
      return { ...state, currentClass: state.lastClass };

    case "CLICK": {
      if (state.hovered === null) return state;
      if (state.pending !== null) {
        return { ...state, toast: "waiting for the server" };
      }
      if (state.currentClass === null) {
        return { ...state, toast: "choose a class (or press Add)" };
      }
      const owner = segmentOwner(state.labels, state.hovered.segment);
      if (owner) {
        return {
          ...state,
          toast: `segment ${state.hovered.segment} already belongs to instance ${owner.instance}`,
        };
      }
      const request: ClickRequest = {
        click: state.hovered.point * state.stride,
        class: state.currentClass,
        instance: state.nextInstance,
      };
      const optimistic: LabelEntry = {
        instance: request.instance,
        class: request.class,
        segment: state.hovered.segment,
        click: request.click,
      };
      return {
        ...state,
        labels: [...state.labels, optimistic],
        nextInstance: state.nextInstance + 1,
        lastClass: state.currentClass,
        currentClass: null,
        pending: {
          request,
          labels: state.labels,
          nextInstance: state.nextInstance,
          currentClass: state.currentClass,
          lastClass: state.lastClass,
        },
      };
    }

    case "CLICK_ACK": {
      const { labels, revision, classes } = event.payload;
      return {
        ...state,
        labels,
        revision,
        classes: { ...state.classes, ...classes },
        nextInstance: Math.max(state.nextInstance, nextAfter(labels)),
        pending: null,
      };
    }

    case "CLICK_REJECTED": {
      if (state.pending === null) return state;
      const { labels, nextInstance, currentClass, lastClass } = state.pending;
      const toast =
        event.status === 0
          ? `network failure — nothing saved, retry (${event.message})`
          : event.message;
      return {
        ...state,
        labels,
        nextInstance,
        currentClass,
        lastClass,
        pending: null,
        toast,
      };
    }

    // Camera pose deliberately survives mode changes, so flipping to the
    // results view and back does not lose the operator's viewpoint.
    case "SET_MODE":
      return { ...state, mode: event.mode, hovered: null };

    case "RESULT_LOADED":
      return { ...state, result: event.payload, resultMissing: false };

    case "RESULT_MISSING":
      return { ...state, result: null, resultMissing: true };

    case "GT_LOADED":
      return { ...state, gtInstance: event.instance };

    case "SET_CAMERA":
      return { ...state, camera: event.pose };

    case "DISMISS_TOAST":
      return { ...state, toast: null };

    default:
      return state;
  }
}

/**
 * Ground-truth instances that already carry a committed click, shown white
 * in with-gt mode. Click indices are full-scene, matching the gt array.
 */
export function completedGtInstances(state: SessionState): Set<number> {
  const done = new Set<number>();
  if (state.gtInstance === null) return done;
  for (const label of state.labels) {
    const gt = state.gtInstance[label.click];
    if (gt !== undefined && gt >= 0) done.add(gt);
  }
  return done;
}

/**
 * Sanity conditions the mirror must hold at every step; exercised by the
 * test suite after each transition.
 */
export function checkInvariants(state: SessionState): void {
  const instances = new Set<number>();
  const segments = new Set<number>();
  for (const label of state.labels) {
    if (instances.has(label.instance)) {
      throw new Error(`instance ${label.instance} labeled twice`);
    }
    if (segments.has(label.segment)) {
      throw new Error(`segment ${label.segment} claimed twice`);
    }
    instances.add(label.instance);
    segments.add(label.segment);
    if (label.instance >= state.nextInstance) {
      throw new Error(
        `next instance id ${state.nextInstance} not above committed ${label.instance}`,
      );
    }
  }
}
