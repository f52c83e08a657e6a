import type {
  DecisionRequest,
  DecisionResponse,
  FinalizeResponse,
  ItemDetail,
  Progress,
  QueuePage,
} from "./types.js";

/** Error carrying the HTTP status and the server's detail message. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the review HTTP API. */
export class ReviewApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  queue(page = 0, pageSize = 20, status = "pending"): Promise<QueuePage> {
    const qs = new URLSearchParams({
      page: String(page),
      page_size: String(pageSize),
      status,
    });
    return this.request<QueuePage>(`/queue?${qs}`);
  }

  item(id: number): Promise<ItemDetail> {
    return this.request<ItemDetail>(`/item/${id}`);
  }

  decide(id: number, decision: DecisionRequest): Promise<DecisionResponse> {
    return this.request<DecisionResponse>(`/item/${id}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
  }

  progress(): Promise<Progress> {
    return this.request<Progress>("/progress");
  }

  finalize(): Promise<FinalizeResponse> {
    return this.request<FinalizeResponse>("/finalize", { method: "POST" });
  }
}
