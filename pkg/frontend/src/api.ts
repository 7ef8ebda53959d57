/**
 * Thin typed client over the review service HTTP endpoints.
 *
 * Network failures surface as NetworkError after bounded exponential
 * backoff; 401 becomes AuthError (the UI shows a re-auth prompt instead of
 * retrying); 409 becomes ConflictError carrying the already-stored
 * resolution so the caller can display it.
 */

import type {
  Codebook,
  ExistingResolution,
  ItemDetail,
  Progress,
  QueueResponse,
  ResolutionForm,
} from "./types.js";

export class AuthError extends Error {
  constructor() {
    super("review token missing or rejected");
    this.name = "AuthError";
  }
}

export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export class ConflictError extends Error {
  constructor(public existing: ExistingResolution | null, message = "already resolved differently") {
    super(message);
    this.name = "ConflictError";
  }
}

export class ServiceValidationError extends Error {
  constructor(public detail: string) {
    super(detail);
    this.name = "ServiceValidationError";
  }
}

export interface ApiOptions {
  baseUrl: string;
  token?: string;
  /** retry attempts for idempotent GETs on network failure */
  retries?: number;
  /** base backoff in ms; doubles per attempt (0 keeps tests fast) */
  backoffMs?: number;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  private baseUrl: string;
  private token?: string;
  private retries: number;
  private backoffMs: number;
  private fetchImpl: typeof fetch;

  constructor(opts: ApiOptions) {
    this.baseUrl = opts.baseUrl.replace(/\/$/, "");
    this.token = opts.token;
    this.retries = opts.retries ?? 3;
    this.backoffMs = opts.backoffMs ?? 250;
    this.fetchImpl = opts.fetchImpl ?? fetch;
  }

  setToken(token: string): void {
    this.token = token;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["X-Review-Token"] = this.token;
    return headers;
  }

  private async request(path: string, init: RequestInit, retryable: boolean): Promise<Response> {
    let attempt = 0;
    for (;;) {
      let response: Response;
      try {
        response = await this.fetchImpl(`${this.baseUrl}${path}`, {
          ...init,
          headers: { ...this.headers(), ...(init.headers ?? {}) },
        });
      } catch (err) {
        if (retryable && attempt < this.retries) {
          await sleep(this.backoffMs * 2 ** attempt);
          attempt += 1;
          continue;
        }
        throw new NetworkError(String(err));
      }
      if (response.status === 401) throw new AuthError();
      return response;
    }
  }

  async fetchQueue(limit = 50): Promise<QueueResponse> {
    const response = await this.request(`/queue?status=pending&limit=${limit}`, {}, true);
    if (!response.ok) throw new NetworkError(`queue fetch failed: HTTP ${response.status}`);
    return (await response.json()) as QueueResponse;
  }

  async fetchItem(itemId: string): Promise<ItemDetail> {
    const response = await this.request(`/items/${encodeURIComponent(itemId)}`, {}, true);
    if (!response.ok) throw new NetworkError(`item fetch failed: HTTP ${response.status}`);
    return (await response.json()) as ItemDetail;
  }

  async fetchCodebook(): Promise<Codebook> {
    const response = await this.request("/codebook", {}, true);
    if (!response.ok) throw new NetworkError(`codebook fetch failed: HTTP ${response.status}`);
    return (await response.json()) as Codebook;
  }

  async fetchProgress(): Promise<Progress> {
    const response = await this.request("/progress", {}, true);
    if (!response.ok) throw new NetworkError(`progress fetch failed: HTTP ${response.status}`);
    return (await response.json()) as Progress;
  }

  /** POST a resolution; not auto-retried (the store guards idempotency). */
  async submitResolution(
    itemId: string,
    form: ResolutionForm,
  ): Promise<"resolved" | "unchanged"> {
    const response = await this.request(
      `/items/${encodeURIComponent(itemId)}/resolution`,
      { method: "POST", body: JSON.stringify(form) },
      false,
    );
    if (response.status === 409) {
      const body = (await response.json()) as { detail?: { existing?: ExistingResolution } };
      throw new ConflictError(body.detail?.existing ?? null);
    }
    if (response.status === 422) {
      const body = (await response.json()) as { detail?: unknown };
      throw new ServiceValidationError(String(body.detail ?? "invalid resolution"));
    }
    if (!response.ok) throw new NetworkError(`resolution failed: HTTP ${response.status}`);
    const body = (await response.json()) as { status: "resolved" | "unchanged" };
    return body.status;
  }

  /** Advisory claim so other reviewers see who has an item open. */
  async claimItem(itemId: string, reviewerId: string): Promise<void> {
    const response = await this.request(
      `/items/${encodeURIComponent(itemId)}/claim`,
      { method: "POST", body: JSON.stringify({ reviewer_id: reviewerId }) },
      false,
    );
    if (!response.ok && response.status !== 404) {
      throw new NetworkError(`claim failed: HTTP ${response.status}`);
    }
  }

  async skipItem(itemId: string): Promise<void> {
    const response = await this.request(
      `/items/${encodeURIComponent(itemId)}/skip`,
      { method: "POST" },
      false,
    );
    if (!response.ok) throw new NetworkError(`skip failed: HTTP ${response.status}`);
  }

  async exportFinal(): Promise<string> {
    const response = await this.request("/export/final", {}, true);
    if (!response.ok) throw new NetworkError(`export failed: HTTP ${response.status}`);
    return await response.text();
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
