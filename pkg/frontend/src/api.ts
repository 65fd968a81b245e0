/** Typed client for the evaluation HTTP API. The server is the single source
 * of truth: nothing is cached locally. */

import type {
  AssignmentsSummary,
  ScoreBody,
  ScoringPayload,
  SelectionBody,
  SelectionPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    public readonly status: number,
    message: string,
    public readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Network-level failure (offline, DNS, aborted); retryable. */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super("network request failed");
    this.name = "NetworkError";
    this.cause = cause;
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((...args) => globalThis.fetch(...args));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON error body; fall through with nulls
    }
    if (!response.ok) {
      const err = (body ?? {}) as { code?: string; message?: string; detail?: unknown };
      throw new ApiError(
        err.code ?? "http_error",
        response.status,
        err.message ?? `request failed with status ${response.status}`,
        err.detail,
      );
    }
    return body as T;
  }

  assignments(token: string): Promise<AssignmentsSummary> {
    return this.request(`/api/assignments/${encodeURIComponent(token)}`);
  }

  scoringTask(token: string): Promise<ScoringPayload> {
    return this.request(`/api/tasks/${encodeURIComponent(token)}/scoring`);
  }

  selectionTask(token: string): Promise<SelectionPayload> {
    return this.request(`/api/tasks/${encodeURIComponent(token)}/selection`);
  }

  submitScore(token: string, body: ScoreBody): Promise<unknown> {
    return this.request("/api/scores", {
      method: "POST",
      headers: { "Content-Type": "application/json", "X-Eval-Token": token },
      body: JSON.stringify({
        nfr_id: body.nfr_id,
        validity: body.validity,
        applicability: body.applicability,
      }),
    });
  }

  submitSelection(token: string, body: SelectionBody): Promise<unknown> {
    return this.request("/api/selections", {
      method: "POST",
      headers: { "Content-Type": "application/json", "X-Eval-Token": token },
      body: JSON.stringify({ nfr_id: body.nfr_id, attribute: body.attribute }),
    });
  }
}
