/**
 * Side-effect layer between the pure reducer and the HTTP API: it owns the
 * optimistic POST round trip (commit locally, send, acknowledge or roll
 * back) and the result fetch. Rendering subscribes to the store; tests
 * drive the controller with a fake Api and never touch the DOM.
 */

import { ApiError, type Api } from "./api.js";
import {
  initialState,
  reduce,
  type SessionEvent,
  type SessionState,
} from "./state.js";
import type { ScenePayload } from "./types.js";

export class Store {
  private listeners: Array<(state: SessionState) => void> = [];

  constructor(private state: SessionState) {}

  getState(): SessionState {
    return this.state;
  }

  dispatch(event: SessionEvent): SessionState {
    this.state = reduce(this.state, event);
    for (const listener of this.listeners) listener(this.state);
    return this.state;
  }

  subscribe(listener: (state: SessionState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}

export class SessionController {
  constructor(
    private api: Api,
    readonly store: Store,
  ) {}

  static create(api: Api, sceneId: string): SessionController {
    return new SessionController(api, new Store(initialState(sceneId)));
  }

  /** Load scene, classes and labels; returns the scene for the renderer. */
  async init(stride: number): Promise<ScenePayload> {
    const [scene, classes, labels] = await Promise.all([
      this.api.fetchScene(stride),
      this.api.fetchClasses(),
      this.api.fetchLabels(),
    ]);
    this.store.dispatch({ type: "SCENE_LOADED", payload: scene });
    this.store.dispatch({ type: "CLASSES_LOADED", classes });
    this.store.dispatch({ type: "LABELS_LOADED", payload: labels });
    return scene;
  }

  hoverAt(point: number | null): void {
    this.store.dispatch({ type: "HOVER", point });
  }

  selectClass(classId: number): void {
    this.store.dispatch({ type: "SELECT_CLASS", classId });
  }

  pressAdd(): void {
    this.store.dispatch({ type: "PRESS_ADD" });
  }

  /**
   * Commit the hovered segment. The reducer decides whether a commit
   * happens (class chosen, segment free, nothing in flight); only an
   * actual optimistic commit is sent to the server.
   */
  async commitClick(): Promise<void> {
    const before = this.store.getState().pending;
    const after = this.store.dispatch({ type: "CLICK" });
    if (after.pending === null || after.pending === before) return;
    try {
      const payload = await this.api.postClick(after.pending.request);
      this.store.dispatch({ type: "CLICK_ACK", payload });
    } catch (err) {
      const status = err instanceof ApiError ? err.status : 0;
      this.store.dispatch({
        type: "CLICK_REJECTED",
        status,
        message: err instanceof Error ? err.message : String(err),
      });
    }
  }

  async setMode(mode: SessionState["mode"]): Promise<void> {
    this.store.dispatch({ type: "SET_MODE", mode });
    if (mode !== "results") return;
    try {
      const result = await this.api.fetchResult();
      if (result === null) {
        this.store.dispatch({ type: "RESULT_MISSING" });
      } else {
        this.store.dispatch({ type: "RESULT_LOADED", payload: result });
      }
    } catch {
      this.store.dispatch({ type: "RESULT_MISSING" });
    }
  }

  loadGroundTruth(instance: number[]): void {
    this.store.dispatch({ type: "GT_LOADED", instance });
  }
}
