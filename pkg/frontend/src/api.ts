// Typed client for the service API. Every mutation carries the version the
// caller saw; on a VersionConflict the envelope is retried against the
// refreshed state so concurrent tabs cannot lose updates.

import type {
  ApiError,
  CompareResult,
  DividePreview,
  OpResult,
  SessionDoc,
  SessionSummary,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

async function parseError(response: Response): Promise<ApiRequestError> {
  let body: ApiError;
  try {
    body = (await response.json()) as ApiError;
  } catch {
    body = { code: "HttpError", message: response.statusText, details: {} };
  }
  return new ApiRequestError(response.status, body);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  createSession(coderId: string, sessionId?: string): Promise<SessionSummary> {
    return this.request("POST", "/api/sessions", {
      coder_id: coderId,
      ...(sessionId ? { session_id: sessionId } : {}),
    });
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("GET", "/api/sessions");
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request("GET", `/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  async sendOp(
    sessionId: string,
    op: string,
    args: Record<string, unknown>,
    expectedVersion: number,
    maxRetries = 5,
  ): Promise<OpResult> {
    // Optimistic concurrency: on conflict, adopt the server's version and
    // resend. The operator itself is idempotent only per version, so each
    // retry is a fresh decision against fresh state.
    let version = expectedVersion;
    for (let attempt = 0; ; attempt++) {
      try {
        return await this.request<OpResult>(
          "POST",
          `/api/sessions/${encodeURIComponent(sessionId)}/ops`,
          { op, args, expected_version: version },
        );
      } catch (error) {
        if (
          error instanceof ApiRequestError &&
          error.body.code === "VersionConflict" &&
          attempt < maxRetries
        ) {
          version = error.body.details["current_version"] as number;
          continue;
        }
        throw error;
      }
    }
  }

  queryImages(
    sessionId: string,
    filter: { taxon?: string; q?: string; uuid?: string },
  ): Promise<{ uuids: string[]; version: number }> {
    const params = new URLSearchParams();
    if (filter.taxon !== undefined) params.set("taxon", filter.taxon);
    if (filter.q !== undefined) params.set("q", filter.q);
    if (filter.uuid !== undefined) params.set("uuid", filter.uuid);
    return this.request(
      "GET",
      `/api/sessions/${encodeURIComponent(sessionId)}/images?${params}`,
    );
  }

  dividePreview(
    sessionId: string,
    path: string[],
    seed = 0,
  ): Promise<DividePreview> {
    return this.request(
      "POST",
      `/api/sessions/${encodeURIComponent(sessionId)}/assist/divide`,
      { path, seed },
    );
  }

  compare(sessionIds: string[]): Promise<CompareResult> {
    return this.request("POST", "/api/compare", { session_ids: sessionIds });
  }

  imageUrl(uuid: string): string {
    return `${this.baseUrl}/api/images/${encodeURIComponent(uuid)}/file`;
  }
}
