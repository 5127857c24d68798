/** Typed client for the retrieval service. Only the documented endpoints
 * are used: GET /health, GET /books, POST /query. */

export interface BookInfo {
  book_id: string;
  title: string;
  sentence_count: number;
  available_n: number[];
}

export interface QueryRequest {
  book_id: string;
  prompt?: string;
  left?: string[];
  right?: string[];
  n: number;
  k: number;
  retriever: "bm25" | "dense";
}

export interface QueryResult {
  rank: number;
  score: number;
  start: number;
  text: string;
  context_before: string[];
  context_after: string[];
}

export interface QueryResponse {
  book_id: string;
  n: number;
  retriever: string;
  query: string;
  results: QueryResult[];
  num_candidates: number;
  capped: boolean;
  timing_ms: number;
}

/** Server answered with a non-2xx status. Anything else a fetch throws
 * (connection refused, DNS, abort) stays a plain error and is treated as
 * a network failure by the caller. */
export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body: unknown = await res.json();
    if (body && typeof body === "object" && "detail" in body) {
      const detail = (body as { detail: unknown }).detail;
      if (typeof detail === "string") return detail;
      return JSON.stringify(detail);
    }
  } catch {
    // non-JSON error body; fall through to the status text
  }
  return res.statusText || "request failed";
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: typeof fetch;

  constructor(baseUrl = "", fetchImpl: typeof fetch = fetch) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  async health(): Promise<{ status: string }> {
    const res = await this.fetchImpl(`${this.base}/health`);
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as { status: string };
  }

  async books(): Promise<BookInfo[]> {
    const res = await this.fetchImpl(`${this.base}/books`);
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as BookInfo[];
  }

  async query(req: QueryRequest): Promise<QueryResponse> {
    const res = await this.fetchImpl(`${this.base}/query`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
    return (await res.json()) as QueryResponse;
  }
}
