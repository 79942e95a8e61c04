import { describe, expect, test } from "vitest";

import {
  checkInvariants,
  completedGtInstances,
  initialState,
  reduce,
  segmentOwner,
  type SessionEvent,
  type SessionState,
} from "../src/state.js";
import type { LabelsPayload, ScenePayload } from "../src/types.js";

const SEG_INDICES = [0, 0, 1, 1, 2, 2, 3, 3];

function scenePayload(stride = 1): ScenePayload {
  const seg = SEG_INDICES.filter((_, i) => i % stride === 0);
  return {
    points: seg.map((_, i) => [i, 0, 0]),
    colors: seg.map(() => [0.5, 0.5, 0.5]),
    segIndices: seg,
    stride,
    numPoints: SEG_INDICES.length,
  };
}

function labelsPayload(
  labels: LabelsPayload["labels"],
  revision: number,
): LabelsPayload {
  return { classes: { "0": "floor", "1": "chair" }, labels, revision };
}

/** Apply an event and re-check the mirror invariants afterwards. */
function step(state: SessionState, event: SessionEvent): SessionState {
  const next = reduce(state, event);
  checkInvariants(next);
  return next;
}

function loaded(stride = 1): SessionState {
  let s = initialState("room");
  s = step(s, { type: "SCENE_LOADED", payload: scenePayload(stride) });
  s = step(s, { type: "LABELS_LOADED", payload: labelsPayload([], 0) });
  return s;
}

/** Select a class, hover a point, click. */
function clickAt(state: SessionState, point: number, cls: number): SessionState {
  let s = step(state, { type: "SELECT_CLASS", classId: cls });
  s = step(s, { type: "HOVER", point });
  return step(s, { type: "CLICK" });
}

describe("hover", () => {
  test("picking a point selects its segment", () => {
    const s = step(loaded(), { type: "HOVER", point: 5 });
    expect(s.hovered).toEqual({ point: 5, segment: 2 });
  });

  test("no hit clears the hover", () => {
    let s = step(loaded(), { type: "HOVER", point: 5 });
    s = step(s, { type: "HOVER", point: null });
    expect(s.hovered).toBeNull();
  });

  test("out-of-range pick clears the hover", () => {
    const s = step(loaded(), { type: "HOVER", point: 99 });
    expect(s.hovered).toBeNull();
  });

  test("hovering a labeled segment exposes its owner", () => {
    let s = clickAt(loaded(), 2, 1);
    s = step(s, { type: "HOVER", point: 3 });
    expect(s.hovered?.segment).toBe(1);
    expect(segmentOwner(s.labels, 1)).toMatchObject({ instance: 0, class: 1 });
  });
});

describe("click commit", () => {
  test("labels the hovered segment and advances the instance counter", () => {
    const s = clickAt(loaded(), 2, 1);
    expect(s.labels).toEqual([{ instance: 0, class: 1, segment: 1, click: 2 }]);
    expect(s.nextInstance).toBe(1);
    expect(s.pending?.request).toEqual({ click: 2, class: 1, instance: 0 });
  });

  test("click indices map back through the display stride", () => {
    const s = clickAt(loaded(4), 1, 0);
    expect(s.pending?.request.click).toBe(4);
  });

  test("the committed class is consumed", () => {
    const s = clickAt(loaded(), 2, 1);
    expect(s.currentClass).toBeNull();
    expect(s.lastClass).toBe(1);
  });

  test("no class chosen: toast, no label", () => {
    let s = step(loaded(), { type: "HOVER", point: 0 });
    s = step(s, { type: "CLICK" });
    expect(s.labels).toHaveLength(0);
    expect(s.toast).toMatch(/class/);
  });

  test("nothing hovered: no-op", () => {
    let s = step(loaded(), { type: "SELECT_CLASS", classId: 0 });
    const after = step(s, { type: "CLICK" });
    expect(after).toEqual(s);
  });

  test("segment already claimed locally: toast, nothing sent", () => {
    let s = clickAt(loaded(), 2, 1);
    s = step(s, { type: "CLICK_ACK", payload: labelsPayload(s.labels, 1) });
    const before = s.labels;
    s = clickAt(s, 3, 0); // same segment 1 via its other point
    expect(s.labels).toBe(before);
    expect(s.pending).toBeNull();
    expect(s.toast).toMatch(/already belongs to instance 0/);
  });

  test("a second click while one is in flight is refused", () => {
    let s = clickAt(loaded(), 2, 1);
    const pending = s.pending;
    s = clickAt(s, 4, 0);
    expect(s.pending).toBe(pending);
    expect(s.labels).toHaveLength(1);
    expect(s.toast).toMatch(/waiting/);
  });
});

describe("Add button", () => {
  test("re-arms the previously used class", () => {
    let s = clickAt(loaded(), 2, 1);
    s = step(s, { type: "CLICK_ACK", payload: labelsPayload(s.labels, 1) });
    s = step(s, { type: "PRESS_ADD" });
    s = step(s, { type: "HOVER", point: 4 });
    s = step(s, { type: "CLICK" });
    expect(s.labels[1]).toMatchObject({ instance: 1, class: 1, segment: 2 });
  });

  test("before any class was chosen it only warns", () => {
    const s = step(loaded(), { type: "PRESS_ADD" });
    expect(s.currentClass).toBeNull();
    expect(s.toast).toMatch(/class/);
  });
});

describe("server acknowledgement", () => {
  test("the server payload replaces the optimistic mirror", () => {
    let s = clickAt(loaded(), 2, 1);
    const serverLabels = [{ instance: 0, class: 1, segment: 1, click: 2 }];
    s = step(s, { type: "CLICK_ACK", payload: labelsPayload(serverLabels, 7) });
    expect(s.labels).toEqual(serverLabels);
    expect(s.revision).toBe(7);
    expect(s.pending).toBeNull();
  });

  test("instance counter stays above everything the server knows", () => {
    let s = loaded();
    const serverLabels = [{ instance: 5, class: 0, segment: 3, click: 6 }];
    s = step(s, { type: "LABELS_LOADED", payload: labelsPayload(serverLabels, 3) });
    expect(s.nextInstance).toBe(6);
    s = clickAt(s, 0, 0);
    expect(s.labels[1].instance).toBe(6);
  });

  test("a conflict rolls everything back and surfaces the reason", () => {
    const base = clickAt(loaded(), 2, 1);
    let s = step(base, { type: "CLICK_ACK", payload: labelsPayload(base.labels, 1) });
    const settled = s;
    s = clickAt(s, 4, 0);
    s = step(s, {
      type: "CLICK_REJECTED",
      status: 409,
      message: "segment 2 already labeled",
    });
    expect(s.labels).toEqual(settled.labels);
    expect(s.nextInstance).toBe(settled.nextInstance);
    expect(s.currentClass).toBe(0); // choice restored so the user can retry
    expect(s.pending).toBeNull();
    expect(s.toast).toMatch(/already labeled/);
  });

  test("a network failure reports that nothing was saved", () => {
    let s = clickAt(loaded(), 2, 1);
    s = step(s, { type: "CLICK_REJECTED", status: 0, message: "fetch failed" });
    expect(s.labels).toHaveLength(0);
    expect(s.toast).toMatch(/nothing saved/);
  });

  test("a rejection without an in-flight click changes nothing", () => {
    const s = loaded();
    expect(step(s, { type: "CLICK_REJECTED", status: 409, message: "x" })).toEqual(s);
  });
});

describe("modes and results", () => {
  test("switching to results and back preserves the camera pose", () => {
    const pose = { yaw: 1.1, pitch: 0.4, distance: 12, target: [1, 2, 3] as [number, number, number] };
    let s = step(loaded(), { type: "SET_CAMERA", pose });
    s = step(s, { type: "SET_MODE", mode: "results" });
    s = step(s, { type: "SET_MODE", mode: "from-scratch" });
    expect(s.camera).toEqual(pose);
  });

  test("entering a mode clears the hover", () => {
    let s = step(loaded(), { type: "HOVER", point: 1 });
    s = step(s, { type: "SET_MODE", mode: "results" });
    expect(s.hovered).toBeNull();
  });

  test("a loaded result replaces any missing flag", () => {
    let s = step(loaded(), { type: "RESULT_MISSING" });
    expect(s.resultMissing).toBe(true);
    const payload = {
      semantic: [0, 0],
      instance: [0, 0],
      clicks: [{ point: 0, instance: 0, class: 0 }],
    };
    s = step(s, { type: "RESULT_LOADED", payload });
    expect(s.result).toEqual(payload);
    expect(s.resultMissing).toBe(false);
  });
});

describe("with-gt progress", () => {
  test("an instance counts as done once one of its points is clicked", () => {
    // gt: segment pairs belong to instances 0,0,1,1 over the 8 points
    const gt = [0, 0, 0, 0, 1, 1, 1, 1];
    let s = step(loaded(), { type: "GT_LOADED", instance: gt });
    expect(completedGtInstances(s).size).toBe(0);
    s = clickAt(s, 2, 1);
    s = step(s, { type: "CLICK_ACK", payload: labelsPayload(s.labels, 1) });
    expect([...completedGtInstances(s)]).toEqual([0]);
  });

  test("unlabeled gt points never count", () => {
    let s = step(loaded(), { type: "GT_LOADED", instance: [-1, -1, -1, -1, -1, -1, -1, -1] });
    s = clickAt(s, 2, 1);
    expect(completedGtInstances(s).size).toBe(0);
  });
});
