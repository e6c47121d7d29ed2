/** Typed client for the review HTTP API; fetch is injectable for tests. */

import type { DecisionRequest, DecisionResponse, QueuePage, ReviewItem, ServerStats } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly errorCode: string,
    detail: string,
  ) {
    super(`${errorCode}: ${detail}`);
  }

  get isRevisionConflict(): boolean {
    return this.errorCode === "RevisionConflict";
  }
}

async function throwApiError(response: Response): Promise<never> {
  let code = `HTTP ${response.status}`;
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    if (body.error) code = body.error;
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiRequestError(response.status, code, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async fetchQueue(page = 1, pageSize = 50): Promise<QueuePage> {
    const response = await this.fetchFn(
      `${this.baseUrl}/review/queue?page=${page}&page_size=${pageSize}`,
    );
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as QueuePage;
  }

  async fetchItem(qaId: string): Promise<ReviewItem> {
    const response = await this.fetchFn(`${this.baseUrl}/review/${encodeURIComponent(qaId)}`);
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as ReviewItem;
  }

  async submitDecision(qaId: string, request: DecisionRequest): Promise<DecisionResponse> {
    const response = await this.fetchFn(
      `${this.baseUrl}/review/${encodeURIComponent(qaId)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      },
    );
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as DecisionResponse;
  }

  async fetchStats(): Promise<ServerStats> {
    const response = await this.fetchFn(`${this.baseUrl}/stats`);
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as ServerStats;
  }
}
