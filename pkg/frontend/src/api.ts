/**
 * Typed client for the classification service HTTP API.
 *
 * The UI never computes scores or colors itself; everything rendered comes
 * from these payloads. Server errors are surfaced verbatim (code + detail)
 * so the banner shows exactly what the service said.
 */

export interface Candidate {
  code: string;
  source: string;
  score: number;
  rank: number;
}

export interface ClassifyResponse {
  candidates: Candidate[];
  audit_id: string;
}

export interface Distribution {
  probs: Record<string, number>;
  chosen: string;
}

export interface HeadingDistribution extends Distribution {
  mode: string;
  constant_branch: boolean;
}

export interface KnnHit {
  code: string;
  text: string;
  similarity: number;
}

export interface GraphElement {
  id: string;
  similarity: number;
  color: string;
}

export interface GraphMatch {
  code: string;
  average_similarity: number;
  elements: GraphElement[];
}

export interface AuditTrail {
  pipeline: string;
  cleaned_text: string;
  created_at: string;
  candidates: Candidate[];
  hs2: Distribution;
  hs4: HeadingDistribution;
  knn: KnnHit[];
  kg: GraphMatch[];
  flat: unknown;
  request: Record<string, unknown>;
  fingerprints: Record<string, string>;
}

export interface Decision {
  action: string;
  code: string | null;
  recorded_at: string;
}

export interface AuditRecord {
  audit_id: string;
  trail: AuditTrail;
  decisions: Decision[];
}

export interface DecisionResponse {
  audit_id: string;
  decision: Decision;
}

export interface ScheduleChild {
  code: string | null;
  description: string;
  statistical_suffix: string | null;
}

export interface ScheduleNode extends ScheduleChild {
  children: ScheduleChild[];
}

export interface HealthResponse {
  status: string;
  version: string;
  engine_fingerprint: string;
}

export interface ClassifyInput {
  description: string;
  weight?: number;
  value?: number;
  top_k?: number;
}

/** A non-2xx response, carrying the server's error JSON untouched. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: string;

  constructor(status: number, code: string, detail: string) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (u, i) => fetch(u, i)) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async classify(input: ClassifyInput): Promise<ClassifyResponse> {
    return this.request<ClassifyResponse>("POST", "/classify", input);
  }

  async audit(auditId: string): Promise<AuditRecord> {
    return this.request<AuditRecord>("GET", `/audit/${encodeURIComponent(auditId)}`);
  }

  async decide(auditId: string, action: "accept" | "override", code?: string): Promise<DecisionResponse> {
    const body: Record<string, string> = { action };
    if (code !== undefined) {
      body.code = code;
    }
    return this.request<DecisionResponse>(
      "POST",
      `/audit/${encodeURIComponent(auditId)}/decision`,
      body,
    );
  }

  async scheduleNode(code: string): Promise<ScheduleNode> {
    return this.request<ScheduleNode>("GET", `/schedule/${encodeURIComponent(code)}`);
  }

  async health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("GET", "/healthz");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "Unreachable", err instanceof Error ? err.message : String(err));
    }
    if (!response.ok) {
      let code = "Internal";
      let detail = `${response.status}`;
      try {
        const parsed = (await response.json()) as { error?: string; detail?: string };
        if (typeof parsed.error === "string") code = parsed.error;
        if (typeof parsed.detail === "string") detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }
}
