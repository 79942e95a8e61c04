import type {
  ClickRequest,
  LabelsPayload,
  ResultPayload,
  ScenePayload,
} from "./types.js";

/** Error with the HTTP status attached; status 0 means the fetch itself failed. */
export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

/** The five endpoints the tool talks to. Tests substitute a fake. */
export interface Api {
  fetchScene(stride: number): Promise<ScenePayload>;
  fetchClasses(): Promise<Record<string, string>>;
  fetchLabels(): Promise<LabelsPayload>;
  postClick(request: ClickRequest): Promise<LabelsPayload>;
  /** Resolves null while no grouped result exists yet (server 404). */
  fetchResult(): Promise<ResultPayload | null>;
}

async function asJson<T>(promise: Promise<Response>): Promise<T> {
  let response: Response;
  try {
    response = await promise;
  } catch (err) {
    throw new ApiError(0, `network failure: ${String(err)}`);
  }
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body?.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class HttpApi implements Api {
  constructor(private baseUrl: string, private sceneId: string) {}

  fetchScene(stride: number): Promise<ScenePayload> {
    return asJson(
      fetch(`${this.baseUrl}/api/scene/${this.sceneId}?stride=${stride}`),
    );
  }

  fetchClasses(): Promise<Record<string, string>> {
    return asJson(fetch(`${this.baseUrl}/api/classes`));
  }

  fetchLabels(): Promise<LabelsPayload> {
    return asJson(fetch(`${this.baseUrl}/api/labels/${this.sceneId}`));
  }

  postClick(request: ClickRequest): Promise<LabelsPayload> {
    return asJson(
      fetch(`${this.baseUrl}/api/labels/${this.sceneId}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      }),
    );
  }

  async fetchResult(): Promise<ResultPayload | null> {
    try {
      return await asJson<ResultPayload>(
        fetch(`${this.baseUrl}/api/result/${this.sceneId}`),
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }
}
