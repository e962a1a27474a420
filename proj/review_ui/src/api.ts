// Thin client for the review API. Every piece of state of record lives on the server.

export type CheckName = "classification_correct" | "fix_valid" | "realistic";
export const CHECK_NAMES: readonly CheckName[] = ["classification_correct", "fix_valid", "realistic"];

export interface CheckValue {
  value: boolean | null;
  note: string;
}
export type Checks = Record<CheckName, CheckValue>;

export interface DiffLine {
  op: "equal" | "delete" | "insert";
  text: string;
}

export interface DiffHunk {
  old_start: number;
  old_count: number;
  new_start: number;
  new_count: number;
  lines: DiffLine[];
}

export interface ItemDetail {
  id: string;
  cwe: { id: string; name?: string; rank?: number; summary?: string };
  vulnerable: string;
  fixed: string;
  provenance: { backend: string; template_version: string; generated_at: string };
  review_state: { state: string; reason?: string };
  checks: Checks;
  decision: Record<string, unknown> | null;
  diff: DiffHunk[];
}

export interface Counts {
  pending: number;
  accepted: number;
  edited_then_accepted: number;
  rejected: number;
}

export interface Progress {
  per_cwe: Record<string, Counts>;
  total: Counts;
}

export interface PendingSummary {
  id: string;
  cwe: string;
  vulnerable_lines: number;
  fixed_lines: number;
  template_version: string;
}

export interface PendingPage {
  items: PendingSummary[];
  page: number;
  page_size: number;
  total_items: number;
  total_pages: number;
  progress: Progress;
}

export interface DecisionPayload {
  checks?: Partial<Record<CheckName, { value: boolean | null; note?: string }>>;
  decision: {
    kind: "accept" | "reject" | "edit";
    reason?: string;
    vulnerable?: string;
    fixed?: string;
    reviewer?: string;
  };
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

// The server could not be reached at all (as opposed to answering with an error).
export class UnreachableError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "UnreachableError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private readonly base = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  pending(query: { page?: number; pageSize?: number; cwe?: string } = {}): Promise<PendingPage> {
    const params = new URLSearchParams();
    if (query.page) params.set("page", String(query.page));
    if (query.pageSize) params.set("page_size", String(query.pageSize));
    if (query.cwe) params.set("cwe", query.cwe);
    const qs = params.toString();
    return this.request("GET", "/api/pending" + (qs ? "?" + qs : ""));
  }

  item(id: string): Promise<ItemDetail> {
    return this.request("GET", "/api/items/" + encodeURIComponent(id));
  }

  progress(): Promise<Progress> {
    return this.request("GET", "/api/progress");
  }

  decide(id: string, payload: DecisionPayload): Promise<ItemDetail> {
    return this.request("POST", "/api/items/" + encodeURIComponent(id) + "/decision", payload);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (e) {
      throw new UnreachableError(e instanceof Error ? e.message : String(e));
    }
    const text = await res.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      throw new ApiError(res.status, "bad_response", "server returned non-JSON content");
    }
    if (!res.ok) {
      const err = (parsed as { error?: { code?: string; message?: string } } | null)?.error;
      throw new ApiError(res.status, err?.code ?? "http_" + res.status, err?.message ?? res.statusText);
    }
    return parsed as T;
  }
}
