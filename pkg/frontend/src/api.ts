import type {
  Acknowledgment,
  CorrectionSubmission,
  Meta,
  ReviewTask,
  SurveySubmission,
  TaskKind,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  /** 4xx responses are rejections of this submission; retrying is pointless. */
  get isRejection(): boolean {
    return this.status >= 400 && this.status < 500;
  }
}

async function toApiError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
    else if (body) detail = JSON.stringify(body.detail ?? body);
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, { headers: this.headers(false) });
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as T;
  }

  meta(): Promise<Meta> {
    return this.get("/api/meta");
  }

  tasks(kind: TaskKind, value?: string, query?: string): Promise<ReviewTask[]> {
    const params = new URLSearchParams({ kind });
    if (value !== undefined) params.set("value", value);
    if (query !== undefined) params.set("query", query);
    return this.get(`/api/tasks?${params}`);
  }

  submitCorrection(body: CorrectionSubmission): Promise<Acknowledgment> {
    return this.post("/api/corrections", body);
  }

  submitSurvey(body: SurveySubmission): Promise<Acknowledgment> {
    return this.post("/api/surveys", body);
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${encodeURIComponent(imageId)}`;
  }

  async reportRaw(layer: "auto" | "model" | "human" = "auto"): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/report?layer=${layer}`, {
      headers: this.headers(false),
    });
    if (!resp.ok) throw await toApiError(resp);
    return resp.text();
  }
}
