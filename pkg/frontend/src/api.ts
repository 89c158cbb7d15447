// Thin typed client for the service's /v1 REST surface. Holds no business
// logic: validation verdicts and aggregates always come from the server.

import type {
  AggregateFn,
  AggregateReading,
  SessionView,
  UploadResult,
  ZoneEvent,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export interface ApiClientOptions {
  baseUrl: string;
  designerToken?: string;
  fetchImpl?: FetchLike;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly token?: string;
  private readonly fetchImpl: FetchLike;

  constructor(options: ApiClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.token = options.designerToken;
    this.fetchImpl = options.fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    opts: { raw?: boolean; designer?: boolean } = {},
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (opts.designer) {
      headers["Authorization"] = `Bearer ${this.token ?? ""}`;
    }
    let payload: string | undefined;
    if (body !== undefined) {
      payload = opts.raw ? (body as string) : JSON.stringify(body);
      headers["Content-Type"] = opts.raw
        ? "application/json; charset=utf-8"
        : "application/json";
    }
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: payload,
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = (await resp.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    const contentType = resp.headers.get("content-type") ?? "";
    if (contentType.startsWith("text/")) {
      return (await resp.text()) as T;
    }
    return (await resp.json()) as T;
  }

  // ---- designer ----

  async createProject(name: string, t?: number): Promise<string> {
    const out = await this.request<{ id: string }>(
      "POST",
      "/v1/projects",
      { name, t },
      { designer: true },
    );
    return out.id;
  }

  async createTask(projectId: string, name: string, t?: number): Promise<string> {
    const out = await this.request<{ id: string }>(
      "POST",
      `/v1/projects/${projectId}/tasks`,
      { name, t },
      { designer: true },
    );
    return out.id;
  }

  /** Upload a raw interchange document; the response carries the server's
   * validation findings (empty list = accepted clean). */
  uploadAsset(projectId: string, document: string, t?: number): Promise<UploadResult> {
    const query = t === undefined ? "" : `?t=${t}`;
    return this.request<UploadResult>(
      "POST",
      `/v1/projects/${projectId}/assets${query}`,
      document,
      { raw: true, designer: true },
    );
  }

  async createAssignment(assetId: string, taskId: string, t?: number): Promise<string> {
    const out = await this.request<{ id: string }>(
      "POST",
      "/v1/assignments",
      { asset_id: assetId, task_id: taskId, t },
      { designer: true },
    );
    return out.id;
  }

  async createAccessCode(projectId: string, t?: number): Promise<string> {
    const out = await this.request<{ code: string }>(
      "POST",
      `/v1/projects/${projectId}/codes`,
      { t },
      { designer: true },
    );
    return out.code;
  }

  // ---- participant (used by tests to drive scenarios) ----

  async subscribe(code: string, pseudonym: string, t?: number): Promise<string> {
    const out = await this.request<{ participant_id: string }>(
      "POST",
      "/v1/subscribe",
      { code, pseudonym, t },
    );
    return out.participant_id;
  }

  async createSession(participantId: string, assignmentId: string, t?: number): Promise<string> {
    const out = await this.request<{ id: string }>("POST", "/v1/sessions", {
      participant_id: participantId,
      assignment_id: assignmentId,
      t,
    });
    return out.id;
  }

  async postLocation(
    sessionId: string,
    lat: number,
    lon: number,
    t?: number,
  ): Promise<ZoneEvent[]> {
    const out = await this.request<{ events: ZoneEvent[] }>(
      "POST",
      `/v1/sessions/${sessionId}/locations`,
      { lat, lon, t },
    );
    return out.events;
  }

  postAnswer(
    sessionId: string,
    questionId: number,
    payload: number | number[] | string,
    lat: number,
    lon: number,
    t?: number,
  ): Promise<{ credits: number }> {
    return this.request("POST", `/v1/sessions/${sessionId}/answers`, {
      question_id: questionId,
      payload,
      lat,
      lon,
      t,
    });
  }

  // ---- analytics ----

  aggregate(taskId: string, fn: AggregateFn): Promise<AggregateReading> {
    return this.request("GET", `/v1/tasks/${taskId}/aggregate?fn=${fn}`);
  }

  taskSessions(taskId: string): Promise<SessionView[]> {
    return this.request("GET", `/v1/tasks/${taskId}/sessions`);
  }

  exportTask(taskId: string): Promise<string> {
    return this.request("GET", `/v1/tasks/${taskId}/export`);
  }
}
