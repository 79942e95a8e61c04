/** Payload shapes of the annotation service (JSON over HTTP). */

/** GET /api/scene/{id}?stride=n — points are decimated by `stride`. */
export interface ScenePayload {
  points: number[][];
  colors: number[][];
  segIndices: number[];
  stride: number;
  numPoints: number;
}

/** One committed seg-level label. Indices refer to the full scene. */
export interface LabelEntry {
  instance: number;
  class: number;
  segment: number;
  click: number;
}

/** GET/POST /api/labels/{id} response. */
export interface LabelsPayload {
  classes: Record<string, string>;
  labels: LabelEntry[];
  revision: number;
}

/** POST /api/labels/{id} body. `click` is a full-scene point index. */
export interface ClickRequest {
  click: number;
  class: number;
  instance: number;
}

/** GET /api/result/{id} — dense pseudo labels plus the click locations. */
export interface ResultPayload {
  semantic: number[];
  instance: number[];
  clicks: { point: number; instance: number; class: number }[];
}
