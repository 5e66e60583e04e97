// Typed client for the review service JSON API.

import type {
  DocumentView,
  EditFields,
  ItemStatus,
  KBEmitResult,
  QueueFilters,
  ReviewItem,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    public reviewer: string = "anonymous",
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path, { cache: "no-store" });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "X-Reviewer-Id": this.reviewer,
      },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  async queue(filters: QueueFilters = {}): Promise<ReviewItem[]> {
    const params = new URLSearchParams();
    if (filters.pmid) params.set("pmid", filters.pmid);
    if (filters.kind) params.set("kind", filters.kind);
    if (filters.minConfidence !== undefined) {
      params.set("min_confidence", String(filters.minConfidence));
    }
    const suffix = params.size ? `?${params.toString()}` : "";
    const data = await this.get<{ items: ReviewItem[] }>(`/queue${suffix}`);
    return data.items;
  }

  async document(pmid: string): Promise<DocumentView> {
    return this.get<DocumentView>(`/document/${encodeURIComponent(pmid)}`);
  }

  async decide(
    itemId: string,
    status: Exclude<ItemStatus, "pending">,
    editedPayload?: EditFields,
  ): Promise<ReviewItem> {
    return this.post<ReviewItem>("/decision", {
      item_id: itemId,
      status,
      edited_payload: editedPayload ?? null,
    });
  }

  async emitKb(path?: string): Promise<KBEmitResult> {
    return this.post<KBEmitResult>("/emit-kb", { path: path ?? null });
  }

  async runs(): Promise<Record<string, unknown>[]> {
    return this.get<Record<string, unknown>[]>("/runs");
  }
}
