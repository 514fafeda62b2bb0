/** Thin typed client over fetch for the curation service.
 *
 * All truth lives on the server: the client holds only the base URL and a
 * bearer token, and every screen re-derives its state from fresh responses.
 * Mutating calls carry a request id so a retry after a dropped reply lands
 * on the server's idempotent replay path instead of acting twice.
 */

import type {
  AssetPayload,
  AtlasResponse,
  ApiErrorBody,
  LabelSubmission,
  Page,
  ReviewQueueItem,
  VocabularyResponse,
  VoteReply,
  VoteSubmission,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** A non-2xx reply, carrying the server's {code, detail} envelope. */
export class ApiRequestError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: string;

  constructor(status: number, body: ApiErrorBody) {
    super(`${body.code}: ${body.detail}`);
    this.name = "ApiRequestError";
    this.status = status;
    this.code = body.code;
    this.detail = body.detail;
  }
}

let requestCounter = 0;

/** Unique id for one logical submission; reused verbatim on retries. */
export function newRequestId(): string {
  const rand =
    typeof crypto !== "undefined" && "randomUUID" in crypto
      ? crypto.randomUUID()
      : Math.random().toString(36).slice(2);
  requestCounter += 1;
  return `ui-${rand}-${requestCounter}`;
}

export class ApiClient {
  private readonly base: string;
  private readonly token: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, token: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.token = token;
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    contentType = "application/json",
  ): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        authorization: `Bearer ${this.token}`,
        ...(body === undefined ? {} : { "content-type": contentType }),
      },
      ...(body === undefined
        ? {}
        : { body: typeof body === "string" ? body : JSON.stringify(body) }),
    };
    const response = await this.fetchFn(this.base + path, init);
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiRequestError(response.status, payload as ApiErrorBody);
    }
    return payload as T;
  }

  vocabulary(): Promise<VocabularyResponse> {
    return this.request("GET", "/vocab");
  }

  asset(assetId: string): Promise<{ access: string; asset: AssetPayload }> {
    return this.request("GET", `/assets/${encodeURIComponent(assetId)}`);
  }

  images(filters: { status?: string; pathology?: string; text?: string } = {}): Promise<
    Page<AssetPayload>
  > {
    const params = new URLSearchParams();
    if (filters.status) params.set("status", filters.status);
    if (filters.pathology) params.set("pathology", filters.pathology);
    if (filters.text) params.set("text", filters.text);
    const query = params.toString();
    return this.request("GET", `/images${query ? `?${query}` : ""}`);
  }

  search(q: string): Promise<Page<AssetPayload>> {
    return this.request("GET", `/search?q=${encodeURIComponent(q)}`);
  }

  submitLabel(
    submission: LabelSubmission,
  ): Promise<{ access: string; asset: AssetPayload }> {
    return this.request("POST", "/labels", submission);
  }

  reviewQueue(status = "ANNOTATED"): Promise<Page<ReviewQueueItem>> {
    return this.request("GET", `/review-queue?status=${encodeURIComponent(status)}`);
  }

  castVote(submission: VoteSubmission): Promise<VoteReply> {
    return this.request("POST", "/votes", submission);
  }

  atlas(): Promise<AtlasResponse> {
    return this.request("GET", "/atlas");
  }

  atlasFilter(csvText: string): Promise<AtlasResponse> {
    return this.request("POST", "/atlas/filter", csvText, "text/csv");
  }

  qcReport(caseId: string): Promise<{ access: string; report: unknown }> {
    return this.request("GET", `/qc/${encodeURIComponent(caseId)}`);
  }
}
